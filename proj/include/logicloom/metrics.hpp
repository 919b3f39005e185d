#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "logicloom/table.hpp"
#include "logicloom/text.hpp"

namespace logicloom {

struct EvalBundle {
    double bleu4 = 0;   // [0, 100]
    double rouge1 = 0;  // F1, [0, 1]
    double rouge2 = 0;
    double rouge4 = 0;
    double rougeL = 0;
    double lf_acc = 0;    // [0, 1]
    double exec_acc = 0;  // [0, 1]
    std::size_t n = 0;

    nlohmann::json to_json() const;
    static EvalBundle from_json(const nlohmann::json& j);
    /// Fixed-order human-readable table.
    std::string to_table() const;
};

/// Corpus BLEU-4 with the multi-bleu.pl conventions: clipped n-gram counts
/// summed over the corpus, uniform weights, brevity penalty, no smoothing.
/// A zero n-gram precision at any order gives 0.
double bleu4(std::span<const Tokens> candidates, std::span<const Tokens> references);

enum class RougeVariant { rouge1, rouge2, rouge4, rougeL };

/// Mean per-pair F1. ROUGE-N over n-gram multisets, ROUGE-L over the longest
/// common subsequence.
double rouge(std::span<const Tokens> candidates, std::span<const Tokens> references, RougeVariant variant);
double rouge_pair(const Tokens& candidate, const Tokens& reference, RougeVariant variant);

/// Fraction of canonicalized predictions equal to the canonicalized gold.
double lf_accuracy(std::span<const std::string> predictions, std::span<const std::string> golds);

enum class ExecMode {
    /// Parses, type-checks and executes to Bool(true).
    truthy,
    /// Parses, type-checks and executes to a Bool without error.
    error_free,
};

ExecMode exec_mode_from_string(std::string_view s);
std::string_view to_string(ExecMode mode);

/// True when `lf` counts as correct under `mode` on `table`.
bool executes_ok(std::string_view lf, const Table& table, ExecMode mode = ExecMode::truthy);

double exec_accuracy(std::span<const std::string> predictions, std::span<const Table* const> tables,
                     ExecMode mode = ExecMode::truthy);

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<double> embed(std::string_view token) const = 0;
    virtual std::size_t dimension() const = 0;
};

/// L2-normalized hashed character-trigram counts over "#token#".
class HashedTrigramEmbedder final : public Embedder {
public:
    static constexpr std::size_t kDimension = 512;
    static constexpr std::uint64_t kSeed = 0xcbf29ce484222325ull;

    std::vector<double> embed(std::string_view token) const override;
    std::size_t dimension() const override { return kDimension; }
};

/// builtin_embed: the default embedder.
std::vector<double> builtin_embed(std::string_view token);

double cosine(std::span<const double> a, std::span<const double> b);

struct GreedyMatch {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

/// BERTScore-style greedy matching over token embeddings. Throws InputError
/// when either sequence is empty. F1 is clamped to [0, 1].
GreedyMatch greedy_match(const Tokens& candidate, const Tokens& reference, const Embedder& embedder);
double greedy_match_f1(const Tokens& candidate, const Tokens& reference, const Embedder& embedder);

/// Text metrics over raw strings with `tokenizer` and LF metrics over tables.
EvalBundle evaluate_all(std::span<const std::string> text_predictions, std::span<const std::string> text_golds,
                        std::span<const std::string> lf_predictions, std::span<const std::string> lf_golds,
                        std::span<const Table* const> tables, const Tokenizer& tokenizer, ExecMode mode = ExecMode::truthy);

}  // namespace logicloom
