#pragma once

// Shared fixtures for the unit tests and the acceptance binary.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "logicloom/lf.hpp"
#include "logicloom/table.hpp"

#ifndef LOGICLOOM_SOURCE_DIR
#define LOGICLOOM_SOURCE_DIR "."
#endif

namespace logicloom::testing {

inline std::filesystem::path source_dir() { return LOGICLOOM_SOURCE_DIR; }

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    return nlohmann::json::parse(is);
}

struct ExecutorCase {
    std::string table;
    std::string lf;
    nlohmann::json expect;
};

struct ExecutorFixture {
    std::map<std::string, Table> tables;
    std::vector<ExecutorCase> cases;
};

inline ExecutorFixture load_executor_fixture() {
    auto j = read_json(source_dir() / "tests" / "fixtures" / "executor_cases.json");
    ExecutorFixture f;
    for (const auto& t : j.at("tables")) {
        Table table = table_from_json(t);
        f.tables.emplace(table.id(), std::move(table));
    }
    for (const auto& c : j.at("cases")) f.cases.push_back({c.at("table"), c.at("lf"), c.at("expect")});
    return f;
}

/// Empty when the case holds, otherwise a description of the mismatch.
inline std::string check_executor_case(const ExecutorCase& c, const std::map<std::string, Table>& tables) {
    const Table& table = tables.at(c.table);
    nlohmann::json got;
    try {
        got = exec_value_to_json(execute_lf(parse_lf(c.lf), table));
    } catch (const ExecError& e) {
        got = {{"error", std::string(to_string(e.kind()))}};
    }
    bool ok = got == c.expect;
    if (!ok && c.expect.contains("num") && got.contains("num")) {
        ok = std::abs(got["num"].get<double>() - c.expect["num"].get<double>()) < 1e-9;
    }
    return ok ? std::string{} : c.lf + ": expected " + c.expect.dump() + ", got " + got.dump();
}

/// Random table of 1..max_rows rows and 2..max_cols columns mixing text,
/// number and date columns. The first column is text with unique cells.
inline Table random_table(const std::string& id, std::mt19937_64& rng, std::size_t max_rows = 6,
                          std::size_t max_cols = 5) {
    static const std::vector<std::string> kNames = {"name", "team", "score", "points", "date", "city",
                                                    "rank", "votes", "round", "venue", "result", "year"};
    static const std::vector<std::string> kWords = {"red", "blue", "green", "oslo", "porto", "lyon", "north",
                                                    "south", "alpha", "delta", "river", "stone", "harbor"};
    static const std::vector<std::string> kMonths = {"january", "march", "may", "july", "september", "november"};
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
    std::size_t rows = 1 + pick(max_rows);
    std::size_t cols = 2 + pick(max_cols - 1);
    std::vector<std::string> columns;
    std::set<std::string> used;
    while (columns.size() < cols) {
        const auto& n = kNames[pick(kNames.size())];
        if (used.insert(n).second) columns.push_back(n);
    }
    std::vector<int> kind(cols);
    kind[0] = 0;
    for (std::size_t c = 1; c < cols; ++c) kind[c] = static_cast<int>(pick(3));
    std::vector<std::vector<std::string>> cells(rows, std::vector<std::string>(cols));
    std::set<std::string> keys;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            std::string v;
            switch (kind[c]) {
                case 0:
                    do {
                        v = kWords[pick(kWords.size())] + " " + kWords[pick(kWords.size())];
                    } while (c == 0 && !keys.insert(v).second);
                    break;
                case 1:
                    v = pick(4) == 0 ? std::to_string(pick(90)) + "." + std::to_string(pick(10))
                                     : std::to_string(pick(40));
                    break;
                default:
                    v = kMonths[pick(kMonths.size())] + " " + std::to_string(1 + pick(28)) + " , " +
                        std::to_string(2000 + pick(3));
            }
            cells[r][c] = v;
        }
    }
    return Table(id, "random table " + id, columns, cells);
}

/// Random well-typed AST built from the registry, `depth` levels at most.
/// Column and value literals come from `table`.
inline LfNode random_ast(ValueType want, int depth, const Table& table, std::mt19937_64& rng) {
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
    auto column = [&] { return LfNode::literal(table.columns()[pick(table.column_count())]); };
    auto cell = [&] {
        if (table.row_count() == 0) return LfNode::literal("1");
        return LfNode::literal(table.cell(pick(table.row_count()), pick(table.column_count())).raw);
    };
    if (want == ValueType::column) return column();
    if (want == ValueType::value) return cell();
    std::vector<const FunctionSig*> fits;
    for (const auto& sig : function_registry()) {
        bool returns = sig.return_type == want || (want == ValueType::object && sig.return_type == ValueType::number);
        if (!returns) continue;
        if (depth <= 1 && !sig.arg_types.empty()) continue;
        fits.push_back(&sig);
    }
    bool leaf_ok = want == ValueType::number || want == ValueType::object;
    if (fits.empty() || (leaf_ok && pick(4) == 0)) {
        if (want == ValueType::number) return LfNode::literal(std::to_string(1 + pick(5)));
        if (want == ValueType::object) return cell();
        if (want == ValueType::boolean) return LfNode::apply("only", {LfNode::apply("all_rows")});
        return LfNode::apply("all_rows");
    }
    const FunctionSig* sig = fits[pick(fits.size())];
    std::vector<LfNode> args;
    for (auto t : sig->arg_types) args.push_back(random_ast(t, depth - 1, table, rng));
    return LfNode::apply(std::string(sig->name), std::move(args));
}

/// View-returning subtrees of `ast` (all_rows included).
inline void collect_views(const LfNode& ast, std::vector<LfNode>& out) {
    if (!ast.is_apply()) return;
    const FunctionSig* sig = find_function(ast.name);
    if (sig && sig->return_type == ValueType::view) out.push_back(ast);
    for (const auto& a : ast.args) collect_views(a, out);
}

/// Checks the executor's algebraic invariants for `view` on every column
/// against every cell literal of that column. Returns the violations.
inline std::vector<std::string> metamorphic_violations(const Table& table, const LfNode& view) {
    std::vector<std::string> bad;
    auto count_of = [&](const LfNode& v) -> std::optional<double> {
        try {
            return std::get<double>(execute_lf(LfNode::apply("count", {v}), table));
        } catch (const ExecError&) {
            return std::nullopt;
        }
    };
    auto n = count_of(view);
    if (!n) return bad;
    std::string where = print_lf(view);
    for (const auto& col_name : table.columns()) {
        LfNode col = LfNode::literal(col_name);
        std::set<std::string> literals;
        for (std::size_t r = 0; r < table.row_count(); ++r) literals.insert(table.cell(r, *table.column_index(col_name)).raw);
        for (const auto& lit_text : literals) {
            LfNode lit = LfNode::literal(lit_text);
            auto f = [&](const char* op) { return *count_of(LfNode::apply(op, {view, col, lit})); };
            double eq = f("filter_eq"), ne = f("filter_not_eq");
            if (eq + ne != *n) bad.push_back("filter_eq + filter_not_eq != count over " + where);
            double gt = f("filter_greater"), le = f("filter_less_eq");
            double ge = f("filter_greater_eq"), lt = f("filter_less");
            if (gt + le != ge + lt) bad.push_back("greater/less_eq vs greater_eq/less split differs over " + where);
            for (double c : {eq, ne, gt, le, ge, lt}) {
                if (c < 0 || c > *n) bad.push_back("filtered count out of bounds over " + where);
            }
            if (gt > ge || lt > le) bad.push_back("strict filter larger than non-strict over " + where);
            LfNode filtered = LfNode::apply("filter_eq", {view, col, lit});
            bool only = std::get<bool>(execute_lf(LfNode::apply("only", {filtered}), table));
            if (only != (eq == 1)) bad.push_back("only disagrees with count = 1 over " + where);
        }
        for (auto [nth, plain] : {std::pair{"nth_max", "max"}, std::pair{"nth_min", "min"}}) {
            std::optional<double> a, b;
            try {
                a = std::get<double>(execute_lf(LfNode::apply(nth, {view, col, LfNode::literal("1")}), table));
            } catch (const ExecError&) {
            }
            try {
                b = std::get<double>(execute_lf(LfNode::apply(plain, {view, col}), table));
            } catch (const ExecError&) {
            }
            if (a != b) bad.push_back(std::string(nth) + " { . ; 1 } != " + plain + " over " + where);
        }
    }
    return bad;
}

}  // namespace logicloom::testing
