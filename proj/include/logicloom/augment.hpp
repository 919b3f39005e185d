#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "logicloom/error.hpp"
#include "logicloom/model.hpp"
#include "logicloom/table.hpp"
#include "logicloom/text.hpp"

namespace logicloom {

enum class ItemKind { lf, text };

std::string_view to_string(ItemKind kind);
ItemKind item_kind_from_string(std::string_view name);

/// An augmented LF (kind lf) or description (kind text) for one table.
struct UnpairedItem {
    ItemKind kind = ItemKind::lf;
    LogicType logic_type = LogicType::count;
    std::string table_id;
    std::string value;

    bool operator==(const UnpairedItem&) const = default;
};

nlohmann::json item_to_json(const UnpairedItem& item);
UnpairedItem item_from_json(const nlohmann::json& j);

struct AugmentStats {
    std::size_t generated = 0;
    std::size_t kept = 0;
    std::size_t dropped_length = 0;
    std::size_t dropped_duplicate = 0;
    /// Split of dropped_duplicate: equal to a training value, or to an
    /// earlier kept candidate.
    std::size_t duplicate_of_training = 0;
    std::size_t duplicate_within = 0;
    std::size_t generation_calls = 0;
    std::map<LogicType, std::size_t> per_topic_kept;

    AugmentStats();
    bool balanced() const { return generated == kept + dropped_length + dropped_duplicate; }
    nlohmann::json to_json() const;
    static AugmentStats from_json(const nlohmann::json& j);
};

enum class FilterVerdict { keep, drop_length, drop_duplicate };

struct FilterOptions {
    std::size_t max_tokens = 200;
    /// Also drop candidates equal to an earlier kept one.
    bool dedup_within = true;
};

/// Normalized form used for duplicate detection: canonical print for LFs,
/// trimmed text for descriptions.
std::string dedup_key(std::string_view value, ItemKind kind);

/// Dedup keys of every training LF or text.
std::unordered_set<std::string> training_keys(const Corpus& corpus, ItemKind kind);

/// Empty and over-long candidates are length drops.
FilterVerdict filter_item(std::string_view candidate, ItemKind kind, const std::unordered_set<std::string>& training,
                          const Tokenizer& tokenizer, std::size_t max_tokens = 200);

struct AugmentResult {
    std::vector<UnpairedItem> items;
    AugmentStats stats;
};

/// Raised when the model fails mid-run; carries what was produced so far.
class AugmentError : public ModelError {
public:
    AugmentError(const std::string& message, AugmentResult partial)
        : ModelError(message), partial_(std::move(partial)) {}
    const AugmentResult& partial() const { return partial_; }

private:
    AugmentResult partial_;
};

/// One generation per (table, topic), tables in id order and topics in the
/// fixed order. `role` must be D2L or D2T.
AugmentResult topicda(const std::map<std::string, Table>& tables, GenerativeModel& model, Role role,
                      const Corpus& training, const Tokenizer& tokenizer, int beam_size = 3,
                      const FilterOptions& options = {});

/// Keyword classifier for descriptions.
LogicType classify_text_topic(std::string_view text);

struct QualityReport {
    std::size_t lf_count = 0;
    std::size_t text_count = 0;
    double lf_parseable = 0;
    double lf_executable = 0;
    double lf_true = 0;
    double lf_topic_consistency = 0;
    std::optional<double> text_true;
    std::optional<std::string> text_error;
    double text_topic_consistency = 0;

    nlohmann::json to_json() const;
};

/// `lg` back-translates texts for the text factual check; a null model or a
/// model failure leaves text_true unset.
QualityReport quality_report(std::span<const UnpairedItem> lfs, std::span<const UnpairedItem> texts,
                             const std::map<std::string, Table>& tables, GenerativeModel* lg, int beam_size = 3);

/// JSON-lines persistence. Each line carries schema_version.
void write_items_jsonl(const std::filesystem::path& path, std::span<const UnpairedItem> items);
std::vector<UnpairedItem> read_items_jsonl(const std::filesystem::path& path);

}  // namespace logicloom
