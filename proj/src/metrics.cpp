#include "logicloom/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "logicloom/lf.hpp"

namespace logicloom {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw InputError(std::string(what) + ": " + std::to_string(a) + " predictions for " + std::to_string(b) +
                         " references");
    }
}

using NgramCounts = std::map<std::vector<std::string_view>, std::size_t>;

NgramCounts ngrams(const Tokens& tokens, std::size_t n) {
    NgramCounts out;
    if (tokens.size() < n) return out;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::vector<std::string_view> g;
        g.reserve(n);
        for (std::size_t k = 0; k < n; ++k) g.emplace_back(tokens[i + k]);
        ++out[g];
    }
    return out;
}

std::size_t total(const NgramCounts& c) {
    std::size_t t = 0;
    for (const auto& [g, n] : c) t += n;
    return t;
}

std::size_t clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
    std::size_t hit = 0;
    for (const auto& [g, n] : cand) {
        auto it = ref.find(g);
        if (it != ref.end()) hit += std::min(n, it->second);
    }
    return hit;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double f1(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

}  // namespace

double bleu4(std::span<const Tokens> candidates, std::span<const Tokens> references) {
    check_lengths(candidates.size(), references.size(), "bleu4");
    std::array<std::size_t, 4> correct{};
    std::array<std::size_t, 4> totals{};
    std::size_t cand_len = 0;
    std::size_t ref_len = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        cand_len += candidates[i].size();
        ref_len += references[i].size();
        for (std::size_t n = 1; n <= 4; ++n) {
            auto c = ngrams(candidates[i], n);
            auto r = ngrams(references[i], n);
            totals[n - 1] += total(c);
            correct[n - 1] += clipped_overlap(c, r);
        }
    }
    if (cand_len == 0) return 0.0;
    double log_sum = 0;
    for (std::size_t n = 0; n < 4; ++n) {
        if (totals[n] == 0 || correct[n] == 0) return 0.0;
        log_sum += std::log(static_cast<double>(correct[n]) / static_cast<double>(totals[n]));
    }
    double bp = cand_len < ref_len ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len)) : 1.0;
    return 100.0 * bp * std::exp(log_sum / 4.0);
}

double rouge_pair(const Tokens& candidate, const Tokens& reference, RougeVariant variant) {
    if (variant == RougeVariant::rougeL) {
        if (candidate.empty() || reference.empty()) return candidate == reference ? 1.0 : 0.0;
        double lcs = static_cast<double>(lcs_length(candidate, reference));
        return f1(lcs / static_cast<double>(candidate.size()), lcs / static_cast<double>(reference.size()));
    }
    std::size_t n = variant == RougeVariant::rouge1 ? 1 : (variant == RougeVariant::rouge2 ? 2 : 4);
    auto c = ngrams(candidate, n);
    auto r = ngrams(reference, n);
    std::size_t tc = total(c);
    std::size_t tr = total(r);
    // Pairs too short to hold an n-gram score 1 only when identical.
    if (tc == 0 && tr == 0) return candidate == reference ? 1.0 : 0.0;
    if (tc == 0 || tr == 0) return 0.0;
    double hit = static_cast<double>(clipped_overlap(c, r));
    return f1(hit / static_cast<double>(tc), hit / static_cast<double>(tr));
}

double rouge(std::span<const Tokens> candidates, std::span<const Tokens> references, RougeVariant variant) {
    check_lengths(candidates.size(), references.size(), "rouge");
    if (candidates.empty()) return 0.0;
    double sum = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) sum += rouge_pair(candidates[i], references[i], variant);
    return sum / static_cast<double>(candidates.size());
}

double lf_accuracy(std::span<const std::string> predictions, std::span<const std::string> golds) {
    check_lengths(predictions.size(), golds.size(), "lf_accuracy");
    if (predictions.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) hits += canonical_lf(predictions[i]) == canonical_lf(golds[i]);
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

ExecMode exec_mode_from_string(std::string_view s) {
    if (s == "truthy") return ExecMode::truthy;
    if (s == "error-free" || s == "error_free") return ExecMode::error_free;
    throw InputError("unknown exec mode '" + std::string(s) + "' (truthy | error-free)");
}

std::string_view to_string(ExecMode mode) { return mode == ExecMode::truthy ? "truthy" : "error-free"; }

bool executes_ok(std::string_view lf, const Table& table, ExecMode mode) {
    try {
        LfNode ast = parse_lf(lf);
        if (!validate_lf(ast).structurally_valid()) return false;
        ExecValue v = execute_lf(ast, table);
        const bool* b = std::get_if<bool>(&v);
        if (!b) return false;
        return mode == ExecMode::error_free || *b;
    } catch (const Error&) {
        return false;
    }
}

double exec_accuracy(std::span<const std::string> predictions, std::span<const Table* const> tables, ExecMode mode) {
    check_lengths(predictions.size(), tables.size(), "exec_accuracy");
    if (predictions.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (tables[i] && executes_ok(predictions[i], *tables[i], mode)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

std::vector<double> HashedTrigramEmbedder::embed(std::string_view token) const {
    std::vector<double> v(kDimension, 0.0);
    if (token.empty()) return v;
    std::string padded = "#" + std::string(token) + "#";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        std::uint64_t h = kSeed;
        for (std::size_t k = 0; k < 3; ++k) {
            h ^= static_cast<unsigned char>(padded[i + k]);
            h *= 0x100000001b3ull;
        }
        v[h % kDimension] += 1.0;
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

std::vector<double> builtin_embed(std::string_view token) { return HashedTrigramEmbedder{}.embed(token); }

double cosine(std::span<const double> a, std::span<const double> b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

GreedyMatch greedy_match(const Tokens& candidate, const Tokens& reference, const Embedder& embedder) {
    if (candidate.empty() || reference.empty()) throw InputError("greedy_match: empty token sequence");
    std::map<std::string, std::vector<double>> cache;
    auto vec = [&](const std::string& t) -> const std::vector<double>& {
        auto it = cache.find(t);
        if (it == cache.end()) it = cache.emplace(t, embedder.embed(t)).first;
        return it->second;
    };
    std::vector<std::vector<double>> sim(candidate.size(), std::vector<double>(reference.size()));
    for (std::size_t i = 0; i < candidate.size(); ++i) {
        for (std::size_t j = 0; j < reference.size(); ++j) {
            // Equal tokens share an embedding; skip the rounding of the dot product.
            sim[i][j] = candidate[i] == reference[j] ? 1.0 : cosine(vec(candidate[i]), vec(reference[j]));
        }
    }
    GreedyMatch m;
    for (std::size_t i = 0; i < candidate.size(); ++i) m.precision += *std::max_element(sim[i].begin(), sim[i].end());
    m.precision /= static_cast<double>(candidate.size());
    for (std::size_t j = 0; j < reference.size(); ++j) {
        double best = sim[0][j];
        for (std::size_t i = 1; i < candidate.size(); ++i) best = std::max(best, sim[i][j]);
        m.recall += best;
    }
    m.recall /= static_cast<double>(reference.size());
    m.f1 = std::clamp(f1(m.precision, m.recall), 0.0, 1.0);
    return m;
}

double greedy_match_f1(const Tokens& candidate, const Tokens& reference, const Embedder& embedder) {
    return greedy_match(candidate, reference, embedder).f1;
}

nlohmann::json EvalBundle::to_json() const {
    return {{"bleu4", bleu4},   {"rouge1", rouge1}, {"rouge2", rouge2},     {"rouge4", rouge4},
            {"rougeL", rougeL}, {"lf_acc", lf_acc}, {"exec_acc", exec_acc}, {"n", n}};
}

EvalBundle EvalBundle::from_json(const nlohmann::json& j) {
    EvalBundle b;
    b.bleu4 = j.at("bleu4").get<double>();
    b.rouge1 = j.at("rouge1").get<double>();
    b.rouge2 = j.at("rouge2").get<double>();
    b.rouge4 = j.at("rouge4").get<double>();
    b.rougeL = j.at("rougeL").get<double>();
    b.lf_acc = j.at("lf_acc").get<double>();
    b.exec_acc = j.at("exec_acc").get<double>();
    b.n = j.at("n").get<std::size_t>();
    return b;
}

std::string EvalBundle::to_table() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "metric    value\n";
    os << "BLEU-4    " << bleu4 << "\n";
    os << "ROUGE-1   " << rouge1 << "\n";
    os << "ROUGE-2   " << rouge2 << "\n";
    os << "ROUGE-4   " << rouge4 << "\n";
    os << "ROUGE-L   " << rougeL << "\n";
    os << "LF Acc.   " << lf_acc << "\n";
    os << "Exec Acc. " << exec_acc << "\n";
    os << "n         " << n << "\n";
    return os.str();
}

EvalBundle evaluate_all(std::span<const std::string> text_predictions, std::span<const std::string> text_golds,
                        std::span<const std::string> lf_predictions, std::span<const std::string> lf_golds,
                        std::span<const Table* const> tables, const Tokenizer& tokenizer, ExecMode mode) {
    EvalBundle b;
    std::vector<Tokens> cand;
    std::vector<Tokens> ref;
    check_lengths(text_predictions.size(), text_golds.size(), "text metrics");
    for (const auto& t : text_predictions) cand.push_back(tokenizer.tokenize(t));
    for (const auto& t : text_golds) ref.push_back(tokenizer.tokenize(t));
    if (!cand.empty()) {
        b.bleu4 = bleu4(cand, ref);
        b.rouge1 = rouge(cand, ref, RougeVariant::rouge1);
        b.rouge2 = rouge(cand, ref, RougeVariant::rouge2);
        b.rouge4 = rouge(cand, ref, RougeVariant::rouge4);
        b.rougeL = rouge(cand, ref, RougeVariant::rougeL);
    }
    if (!lf_predictions.empty() || !lf_golds.empty()) {
        b.lf_acc = lf_accuracy(lf_predictions, lf_golds);
        b.exec_acc = exec_accuracy(lf_predictions, tables, mode);
    }
    b.n = std::max(text_predictions.size(), lf_predictions.size());
    return b;
}

}  // namespace logicloom
