#include <cmath>
#include <optional>
#include <random>

#include "logicloom/lf.hpp"
#include "logicloom/text.hpp"

namespace logicloom {

namespace {

// A literal must survive print/parse: non-empty and free of '{', '}', ';'.
bool literal_safe(std::string_view s) {
    if (trim(s).empty()) return false;
    return s.find_first_of("{};") == std::string_view::npos;
}

class Sampler {
public:
    Sampler(const Table& table, LogicType topic, std::uint64_t seed, int budget)
        : table_(table), topic_(topic), budget_(budget) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(topic)};
        rng_.seed(seq);
    }

    // One attempt; nullopt when the drawn structure did not work out.
    std::optional<LfNode> attempt() {
        switch (topic_) {
            case LogicType::count: return count();
            case LogicType::superlative: return superlative();
            case LogicType::ordinal: return ordinal();
            case LogicType::unique: return unique();
            case LogicType::aggregation: return aggregation();
            case LogicType::majority: return majority();
            case LogicType::comparative: return comparative();
        }
        return std::nullopt;
    }

    // Smallest depth any template of the topic needs.
    int min_depth() const {
        switch (topic_) {
            case LogicType::majority: return 2;
            case LogicType::unique: return 2;
            case LogicType::comparative: return 4;
            default: return 3;
        }
    }

private:
    std::size_t pick(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(rng_() % n); }
    bool coin() { return (rng_() & 1u) != 0; }

    template <typename T>
    const T& choose(const std::vector<T>& v) { return v[pick(v.size())]; }

    LfNode lit(std::string_view s) { return LfNode::literal(s); }
    LfNode col_lit(std::size_t c) { return LfNode::literal(table_.columns()[c]); }

    std::vector<std::size_t> usable_columns(bool ordered) const {
        std::vector<std::size_t> out;
        for (std::size_t c = 0; c < table_.column_count(); ++c) {
            if (!literal_safe(table_.columns()[c])) continue;
            if (ordered) {
                bool any = false;
                for (const auto& row : table_.rows()) any |= row[c].number.has_value();
                if (!any) continue;
            }
            out.push_back(c);
        }
        return out;
    }

    std::optional<std::string> random_cell(std::size_t col, bool numeric) {
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < table_.row_count(); ++r) {
            const auto& cell = table_.cell(r, col);
            if (!literal_safe(cell.raw)) continue;
            if (numeric && !cell.number) continue;
            rows.push_back(r);
        }
        if (rows.empty()) return std::nullopt;
        return table_.cell(choose(rows), col).raw;
    }

    // all_rows or a chain of filters no deeper than `depth`.
    LfNode random_view(int depth) {
        if (depth <= 1 || coin()) return LfNode::apply("all_rows");
        LfNode inner = random_view(depth - 1);
        static const std::vector<std::string> ops = {"filter_eq", "filter_eq", "filter_not_eq", "filter_greater",
                                                     "filter_less", "filter_greater_eq", "filter_less_eq"};
        const std::string& op = choose(ops);
        bool ordered = op != "filter_eq" && op != "filter_not_eq";
        auto cols = usable_columns(ordered);
        if (cols.empty()) return inner;
        std::size_t c = choose(cols);
        auto value = random_cell(c, ordered);
        if (!value) return inner;
        return LfNode::apply(op, {std::move(inner), col_lit(c), lit(*value)});
    }

    std::optional<ExecValue> run(const LfNode& n) {
        try {
            return execute_lf(n, table_);
        } catch (const ExecError&) {
            return std::nullopt;
        }
    }

    std::optional<std::size_t> rows_of(const LfNode& view) {
        auto v = run(view);
        if (!v) return std::nullopt;
        return std::get<View>(*v).rows.size();
    }

    std::optional<std::string> scalar_text(const LfNode& n) {
        auto v = run(n);
        if (!v) return std::nullopt;
        if (auto* d = std::get_if<double>(&*v)) return format_number(*d);
        if (auto* c = std::get_if<CellValue>(&*v)) {
            if (!literal_safe(c->raw)) return std::nullopt;
            return c->raw;
        }
        return std::nullopt;
    }

    std::optional<LfNode> count() {
        LfNode v = random_view(budget_ - 2);
        auto n = rows_of(v);
        if (!n) return std::nullopt;
        return LfNode::apply("eq", {LfNode::apply("count", {std::move(v)}), lit(std::to_string(*n))});
    }

    // eq { hop { <selector> { V ; c (; n) } ; c2 } ; value } or
    // eq { <aggregate> { V ; c (; n) } ; number }.
    std::optional<LfNode> ranked(const std::string& row_fn, const std::string& value_fn, bool with_nth) {
        auto num_cols = usable_columns(true);
        auto all_cols = usable_columns(false);
        if (num_cols.empty() || all_cols.empty()) return std::nullopt;
        bool via_hop = budget_ >= 4 && coin();
        LfNode v = random_view(budget_ - (via_hop ? 3 : 2));
        auto rows = rows_of(v);
        if (!rows || *rows == 0) return std::nullopt;
        std::size_t c = choose(num_cols);
        std::vector<LfNode> args = {std::move(v), col_lit(c)};
        if (with_nth) args.push_back(lit(std::to_string(1 + pick(std::min<std::size_t>(*rows, 3)))));
        LfNode target;
        if (via_hop) {
            target = LfNode::apply("hop", {LfNode::apply(row_fn, std::move(args)), col_lit(choose(all_cols))});
        } else {
            target = LfNode::apply(value_fn, std::move(args));
        }
        auto value = scalar_text(target);
        if (!value) return std::nullopt;
        return LfNode::apply("eq", {std::move(target), lit(*value)});
    }

    std::optional<LfNode> superlative() {
        bool high = coin();
        return ranked(high ? "argmax" : "argmin", high ? "max" : "min", false);
    }

    std::optional<LfNode> ordinal() {
        bool high = coin();
        return ranked(high ? "nth_argmax" : "nth_argmin", high ? "nth_max" : "nth_min", true);
    }

    std::optional<LfNode> unique() {
        bool with_hop = budget_ >= 4 && coin();
        LfNode v = random_view(budget_ - (with_hop ? 3 : 1));
        if (v.is("all_rows") && table_.row_count() != 1) return std::nullopt;
        auto rows = rows_of(v);
        if (!rows || *rows != 1) return std::nullopt;
        LfNode only = LfNode::apply("only", {v});
        if (!with_hop) return only;
        auto cols = usable_columns(false);
        if (cols.empty()) return std::nullopt;
        LfNode hop = LfNode::apply("hop", {v, col_lit(choose(cols))});
        auto value = scalar_text(hop);
        if (!value) return std::nullopt;
        return LfNode::apply("and", {std::move(only), LfNode::apply("eq", {std::move(hop), lit(*value)})});
    }

    std::optional<LfNode> aggregation() {
        auto cols = usable_columns(true);
        if (cols.empty()) return std::nullopt;
        LfNode v = random_view(budget_ - 2);
        bool average = coin();
        LfNode agg = LfNode::apply(average ? "avg" : "sum", {std::move(v), col_lit(choose(cols))});
        auto result = run(agg);
        if (!result) return std::nullopt;
        double x = std::get<double>(*result);
        bool integral = std::abs(x - std::round(x)) < 1e-9;
        return LfNode::apply(integral && !average ? "eq" : "round_eq", {std::move(agg), lit(format_number(x))});
    }

    std::optional<LfNode> majority() {
        static const std::vector<std::string> ops = {"eq", "eq", "not_eq", "greater", "less", "greater_eq", "less_eq"};
        const std::string& op = choose(ops);
        bool ordered = op != "eq" && op != "not_eq";
        auto cols = usable_columns(ordered);
        if (cols.empty()) return std::nullopt;
        std::size_t c = choose(cols);
        auto value = random_cell(c, ordered);
        if (!value) return std::nullopt;
        LfNode v = random_view(budget_ - 1);
        auto rows = rows_of(v);
        if (!rows || *rows == 0) return std::nullopt;
        std::string fn = (*rows >= 3 && pick(3) == 0 ? "all_" : "most_") + op;
        return LfNode::apply(fn, {std::move(v), col_lit(c), lit(*value)});
    }

    std::optional<LfNode> comparative() {
        if (table_.row_count() < 2) return std::nullopt;
        auto num_cols = usable_columns(true);
        auto key_cols = usable_columns(false);
        if (num_cols.empty() || key_cols.empty()) return std::nullopt;
        std::size_t key = choose(key_cols);
        std::size_t c = choose(num_cols);
        std::size_t r1 = pick(table_.row_count());
        std::size_t r2 = pick(table_.row_count());
        if (r1 == r2) return std::nullopt;
        const auto& k1 = table_.cell(r1, key).raw;
        const auto& k2 = table_.cell(r2, key).raw;
        if (!literal_safe(k1) || !literal_safe(k2)) return std::nullopt;
        auto select = [&](const std::string& k) {
            return LfNode::apply("hop", {LfNode::apply("filter_eq", {LfNode::apply("all_rows"), col_lit(key), lit(k)}),
                                         col_lit(c)});
        };
        LfNode a = select(k1);
        LfNode b = select(k2);
        if (budget_ >= 5 && coin()) {
            LfNode d = LfNode::apply("diff", {a, b});
            auto value = scalar_text(d);
            if (!value) return std::nullopt;
            return LfNode::apply("eq", {std::move(d), lit(*value)});
        }
        auto va = run(a);
        auto vb = run(b);
        if (!va || !vb) return std::nullopt;
        const auto& ca = std::get<CellValue>(*va);
        const auto& cb = std::get<CellValue>(*vb);
        if (!ca.number || !cb.number || *ca.number == *cb.number) return std::nullopt;
        return LfNode::apply(*ca.number > *cb.number ? "greater" : "less", {std::move(a), std::move(b)});
    }

    const Table& table_;
    LogicType topic_;
    int budget_;
    std::mt19937_64 rng_;
};

}  // namespace

LfNode sample_lf(const Table& table, LogicType topic, std::uint64_t seed, int depth_budget, const SampleOptions& options) {
    if (table.row_count() == 0) throw SamplingExhausted("cannot sample over a table with no rows");
    Sampler sampler(table, topic, seed, depth_budget);
    if (depth_budget < sampler.min_depth()) {
        throw SamplingExhausted("depth budget " + std::to_string(depth_budget) + " is below the " +
                                std::string(to_string(topic)) + " minimum of " + std::to_string(sampler.min_depth()));
    }
    for (int i = 0; i < options.max_retries; ++i) {
        auto candidate = sampler.attempt();
        if (!candidate || lf_depth(*candidate) > depth_budget) continue;
        if (classify_lf_topic(*candidate) != topic) continue;
        try {
            auto v = execute_lf(*candidate, table);
            if (auto* b = std::get_if<bool>(&v); b && *b) return *std::move(candidate);
        } catch (const ExecError&) {
        }
    }
    throw SamplingExhausted("no true " + std::string(to_string(topic)) + " logical form found for table '" + table.id() +
                            "' after " + std::to_string(options.max_retries) + " attempts");
}

}  // namespace logicloom
