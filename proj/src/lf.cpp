#include "logicloom/lf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <set>

#include "logicloom/text.hpp"

namespace logicloom {

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

namespace {

using VT = ValueType;
using LT = LogicType;

const std::vector<FunctionSig>& registry() {
    static const std::vector<FunctionSig> sigs = [] {
        std::vector<FunctionSig> s;
        const std::vector<LT> any(kLogicTypes.begin(), kLogicTypes.end());
        s.push_back({"all_rows", {}, VT::view, any});
        for (auto name : {"filter_eq", "filter_not_eq", "filter_greater", "filter_less", "filter_greater_eq",
                          "filter_less_eq"}) {
            s.push_back({name, {VT::view, VT::column, VT::value}, VT::view, any});
        }
        s.push_back({"argmax", {VT::view, VT::column}, VT::view, {LT::superlative}});
        s.push_back({"argmin", {VT::view, VT::column}, VT::view, {LT::superlative}});
        s.push_back({"nth_argmax", {VT::view, VT::column, VT::number}, VT::view, {LT::ordinal}});
        s.push_back({"nth_argmin", {VT::view, VT::column, VT::number}, VT::view, {LT::ordinal}});
        s.push_back({"count", {VT::view}, VT::number, {LT::count}});
        s.push_back({"hop", {VT::view, VT::column}, VT::object, any});
        s.push_back({"max", {VT::view, VT::column}, VT::number, {LT::superlative}});
        s.push_back({"min", {VT::view, VT::column}, VT::number, {LT::superlative}});
        s.push_back({"sum", {VT::view, VT::column}, VT::number, {LT::aggregation}});
        s.push_back({"avg", {VT::view, VT::column}, VT::number, {LT::aggregation}});
        s.push_back({"nth_max", {VT::view, VT::column, VT::number}, VT::number, {LT::ordinal}});
        s.push_back({"nth_min", {VT::view, VT::column, VT::number}, VT::number, {LT::ordinal}});
        for (auto name : {"eq", "not_eq", "round_eq"}) s.push_back({name, {VT::object, VT::object}, VT::boolean, any});
        s.push_back({"greater", {VT::object, VT::object}, VT::boolean, {LT::comparative}});
        s.push_back({"less", {VT::object, VT::object}, VT::boolean, {LT::comparative}});
        s.push_back({"diff", {VT::object, VT::object}, VT::number, {LT::comparative}});
        s.push_back({"and", {VT::boolean, VT::boolean}, VT::boolean, {LT::unique, LT::comparative}});
        s.push_back({"only", {VT::view}, VT::boolean, {LT::unique}});
        for (auto name : {"all_eq", "all_not_eq", "all_greater", "all_less", "all_greater_eq", "all_less_eq",
                          "most_eq", "most_not_eq", "most_greater", "most_less", "most_greater_eq", "most_less_eq"}) {
            s.push_back({name, {VT::view, VT::column, VT::value}, VT::boolean, {LT::majority}});
        }
        return s;
    }();
    return sigs;
}

}  // namespace

std::span<const FunctionSig> function_registry() { return registry(); }

const FunctionSig* find_function(std::string_view name) {
    for (const auto& sig : registry()) {
        if (sig.name == name) return &sig;
    }
    return nullptr;
}

std::string_view to_string(ValueType type) {
    switch (type) {
        case ValueType::view: return "View";
        case ValueType::column: return "Col";
        case ValueType::value: return "Val";
        case ValueType::number: return "Num";
        case ValueType::object: return "Obj";
        case ValueType::boolean: return "Bool";
    }
    return "Val";
}

// ---------------------------------------------------------------------------
// AST
// ---------------------------------------------------------------------------

LfNode LfNode::apply(std::string function, std::vector<LfNode> args) {
    LfNode n;
    n.kind = Kind::apply;
    n.name = std::move(function);
    n.args = std::move(args);
    return n;
}

LfNode LfNode::literal(std::string_view text) {
    LfNode n;
    n.kind = Kind::literal;
    n.name = join(split_whitespace(text));
    return n;
}

bool operator==(const LfNode& a, const LfNode& b) {
    return a.kind == b.kind && a.name == b.name && a.args == b.args;
}

int lf_depth(const LfNode& node) {
    int deepest = 0;
    for (const auto& a : node.args) deepest = std::max(deepest, lf_depth(a));
    return deepest + 1;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

ParseError::ParseError(Kind kind, std::string message, std::size_t offset, std::size_t length)
    : InputError(message + " at offset " + std::to_string(offset)), kind_(kind), offset_(offset), length_(length) {}

namespace {

struct Token {
    enum class Kind { word, lbrace, rbrace, semi, end };
    Kind kind;
    std::string text;
    std::size_t offset;
};

std::vector<Token> lex(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '{') {
            out.push_back({Token::Kind::lbrace, "{", i++});
        } else if (c == '}') {
            out.push_back({Token::Kind::rbrace, "}", i++});
        } else if (c == ';') {
            out.push_back({Token::Kind::semi, ";", i++});
        } else {
            std::size_t start = i;
            while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])) && s[i] != '{' && s[i] != '}' &&
                   s[i] != ';') {
                ++i;
            }
            out.push_back({Token::Kind::word, std::string(s.substr(start, i - start)), start});
        }
    }
    out.push_back({Token::Kind::end, "", s.size()});
    return out;
}

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src), toks_(lex(src)) {}

    LfNode parse() {
        if (peek().kind == Token::Kind::end) throw ParseError(ParseError::Kind::empty, "empty logical form", 0, 0);
        LfNode root = expr();
        const Token& t = peek();
        switch (t.kind) {
            case Token::Kind::end: return root;
            case Token::Kind::rbrace:
                throw ParseError(ParseError::Kind::unbalanced_braces, "unbalanced braces: unexpected '}'", t.offset, 1);
            case Token::Kind::semi:
                throw ParseError(ParseError::Kind::dangling_separator, "dangling separator ';' outside arguments",
                                 t.offset, 1);
            default:
                throw ParseError(ParseError::Kind::unexpected_token, "unexpected '" + t.text + "' after expression",
                                 t.offset, t.text.size());
        }
    }

private:
    const Token& peek() const { return toks_[pos_]; }
    const Token& next() { return toks_[pos_++]; }

    LfNode expr() {
        const Token& first = peek();
        if (first.kind != Token::Kind::word) {
            if (first.kind == Token::Kind::semi) {
                throw ParseError(ParseError::Kind::dangling_separator, "dangling separator ';'", first.offset, 1);
            }
            if (first.kind == Token::Kind::end) {
                throw ParseError(ParseError::Kind::unbalanced_braces, "unbalanced braces: input ended inside arguments",
                                 first.offset, 0);
            }
            throw ParseError(ParseError::Kind::unexpected_token, "expected a function or literal, found '" + first.text + "'",
                             first.offset, first.text.size());
        }
        std::vector<const Token*> words;
        while (peek().kind == Token::Kind::word) words.push_back(&next());
        std::size_t span_begin = words.front()->offset;
        std::size_t span_end = words.back()->offset + words.back()->text.size();

        if (peek().kind != Token::Kind::lbrace) {
            if (words.size() == 1 && words.front()->text == "all_rows") return LfNode::apply("all_rows");
            std::string text;
            for (const auto* w : words) {
                if (!text.empty()) text += ' ';
                text += w->text;
            }
            return LfNode::literal(text);
        }

        std::string_view span = src_.substr(span_begin, span_end - span_begin);
        if (words.size() != 1 || !find_function(words.front()->text)) {
            throw ParseError(ParseError::Kind::unknown_function, "unknown function '" + std::string(span) + "'",
                             span_begin, span_end - span_begin);
        }
        const std::string& fname = words.front()->text;
        const Token& open = next();
        std::vector<LfNode> args;
        if (peek().kind != Token::Kind::rbrace) {
            args.push_back(expr());
            while (peek().kind == Token::Kind::semi) {
                const Token& sep = next();
                if (peek().kind == Token::Kind::rbrace || peek().kind == Token::Kind::semi) {
                    throw ParseError(ParseError::Kind::dangling_separator, "dangling separator ';'", sep.offset, 1);
                }
                args.push_back(expr());
            }
        }
        const Token& close = peek();
        if (close.kind != Token::Kind::rbrace) {
            if (close.kind == Token::Kind::end) {
                throw ParseError(ParseError::Kind::unbalanced_braces,
                                 "unbalanced braces: '{' of '" + fname + "' is never closed", open.offset, 1);
            }
            throw ParseError(ParseError::Kind::unexpected_token, "expected ';' or '}', found '" + close.text + "'",
                             close.offset, close.text.size());
        }
        next();
        const FunctionSig* sig = find_function(fname);
        if (args.size() != sig->arg_types.size()) {
            throw ParseError(ParseError::Kind::arity_mismatch,
                             "mismatch between the number of arguments: '" + fname + "' expects " +
                                 std::to_string(sig->arg_types.size()) + ", got " + std::to_string(args.size()),
                             span_begin, close.offset + 1 - span_begin);
        }
        return LfNode::apply(fname, std::move(args));
    }

    std::string_view src_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

void print_into(const LfNode& n, std::string& out) {
    if (n.is_literal()) {
        out += n.name;
        return;
    }
    out += n.name;
    if (n.args.empty()) {
        if (n.name != "all_rows") out += " { }";
        return;
    }
    out += " { ";
    for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) out += " ; ";
        print_into(n.args[i], out);
    }
    out += " }";
}

}  // namespace

LfNode parse_lf(std::string_view surface) { return Parser(surface).parse(); }

std::string print_lf(const LfNode& node) {
    std::string out;
    print_into(node, out);
    return out;
}

std::string canonical_lf(std::string_view surface) {
    try {
        return print_lf(parse_lf(surface));
    } catch (const ParseError&) {
        return trim(surface);
    }
}

// ---------------------------------------------------------------------------
// Type checking
// ---------------------------------------------------------------------------

namespace {

bool accepts(ValueType expected, ValueType actual) {
    if (expected == ValueType::object) {
        return actual == ValueType::object || actual == ValueType::number || actual == ValueType::value;
    }
    return expected == actual;
}

ValueType literal_type(const LfNode& lit) {
    return parse_cell(lit.name).kind == CellKind::number ? ValueType::number : ValueType::value;
}

ValueType check(const LfNode& n, const Table* table, std::vector<Violation>& out) {
    if (n.is_literal()) return literal_type(n);
    const FunctionSig* sig = find_function(n.name);
    if (!sig) {
        out.push_back({Violation::Kind::type_mismatch, print_lf(n), "unknown function '" + n.name + "'"});
        return ValueType::value;
    }
    if (sig->arg_types.size() != n.args.size()) {
        out.push_back({Violation::Kind::type_mismatch, print_lf(n),
                       "mismatch between the number of arguments: '" + n.name + "' expects " +
                           std::to_string(sig->arg_types.size()) + ", got " + std::to_string(n.args.size())});
        return sig->return_type;
    }
    for (std::size_t i = 0; i < n.args.size(); ++i) {
        const LfNode& a = n.args[i];
        ValueType expected = sig->arg_types[i];
        if (expected == ValueType::column || expected == ValueType::value) {
            if (!a.is_literal()) {
                ValueType actual = check(a, table, out);
                out.push_back({Violation::Kind::type_mismatch, print_lf(a),
                               std::string(to_string(actual)) + " where " + std::string(to_string(expected)) +
                                   " expected"});
                continue;
            }
            if (expected == ValueType::column && table && !table->column_index(a.name)) {
                out.push_back({Violation::Kind::unknown_column, a.name, "unknown column '" + a.name + "'"});
            }
            continue;
        }
        ValueType actual = check(a, table, out);
        if (!accepts(expected, actual)) {
            out.push_back({Violation::Kind::type_mismatch, print_lf(a),
                           std::string(to_string(actual)) + " where " + std::string(to_string(expected)) + " expected"});
        }
    }
    return sig->return_type;
}

}  // namespace

bool ValidityReport::structurally_valid() const {
    return std::none_of(violations.begin(), violations.end(),
                        [](const Violation& v) { return v.kind == Violation::Kind::type_mismatch; });
}

nlohmann::json ValidityReport::to_json() const {
    nlohmann::json vs = nlohmann::json::array();
    for (const auto& v : violations) {
        vs.push_back({{"kind", v.kind == Violation::Kind::type_mismatch ? "type_mismatch" : "unknown_column"},
                      {"subtree", v.subtree},
                      {"message", v.message}});
    }
    return {{"structurally_valid", structurally_valid()},
            {"table_valid", table_valid()},
            {"root_type", std::string(to_string(root_type))},
            {"violations", vs}};
}

ValidityReport validate_lf(const LfNode& ast, const Table* table) {
    ValidityReport report;
    report.root_type = check(ast, table, report.violations);
    return report;
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

ExecError::ExecError(Kind kind, std::string subtree, std::string detail)
    : Error(std::string(to_string(kind)) + ": " + detail + " in '" + subtree + "'"), kind_(kind), subtree_(std::move(subtree)) {}

std::string_view to_string(ExecError::Kind kind) {
    switch (kind) {
        case ExecError::Kind::column_not_found: return "ColumnNotFound";
        case ExecError::Kind::empty_view: return "EmptyView";
        case ExecError::Kind::exactly_one_row_required: return "ExactlyOneRowRequired";
        case ExecError::Kind::nth_out_of_range: return "NthOutOfRange";
        case ExecError::Kind::non_numeric_column: return "NonNumericColumn";
        case ExecError::Kind::type_error: return "TypeError";
    }
    return "TypeError";
}

nlohmann::json exec_value_to_json(const ExecValue& value) {
    return std::visit(
        [](const auto& v) -> nlohmann::json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, bool>) {
                return {{"bool", v}};
            } else if constexpr (std::is_same_v<T, double>) {
                if (std::abs(v - std::round(v)) < 1e-9 && std::abs(v) < 1e15) return {{"num", static_cast<long long>(std::llround(v))}};
                return {{"num", v}};
            } else if constexpr (std::is_same_v<T, CellValue>) {
                return {{"obj", v.raw}};
            } else {
                return {{"view", v.rows}};
            }
        },
        value);
}

namespace {

std::string match_key(std::string_view s) { return join(split_whitespace(to_lower(s))); }

int date_key(const Date& d, bool with_year) { return (with_year ? d.year * 10000 : 0) + d.month * 100 + d.day; }

// Three-way ordering when both sides are numbers or both are dates.
std::optional<int> order(const CellValue& a, const CellValue& b) {
    if (a.number && b.number) {
        if (*a.number < *b.number) return -1;
        if (*a.number > *b.number) return 1;
        return 0;
    }
    if (a.date && b.date) {
        bool years = a.date->year && b.date->year;
        int ka = date_key(*a.date, years);
        int kb = date_key(*b.date, years);
        return ka < kb ? -1 : (ka > kb ? 1 : 0);
    }
    return std::nullopt;
}

CellValue number_cell(double v) {
    CellValue c = parse_cell(format_number(v));
    c.number = v;
    c.kind = CellKind::number;
    return c;
}

class Evaluator {
public:
    explicit Evaluator(const Table& table) : table_(table) {}

    ExecValue eval(const LfNode& n) {
        if (n.is_literal()) return parse_cell(n.name);
        const std::string& f = n.name;
        if (f == "all_rows") {
            View v{std::vector<std::size_t>(table_.row_count()), &table_};
            std::iota(v.rows.begin(), v.rows.end(), std::size_t{0});
            return v;
        }
        if (f.starts_with("filter_")) {
            View in = view_arg(n, 0);
            std::size_t col = column_arg(n, 1);
            CellValue lit = literal_arg(n, 2);
            std::string_view op = std::string_view(f).substr(7);
            View out{{}, &table_};
            for (auto r : in.rows) {
                if (compare(op, table_.cell(r, col), lit)) out.rows.push_back(r);
            }
            return out;
        }
        if (f == "argmax" || f == "argmin" || f == "nth_argmax" || f == "nth_argmin") {
            View in = view_arg(n, 0);
            std::size_t col = column_arg(n, 1);
            bool descending = f.ends_with("max");
            std::size_t nth = f.starts_with("nth_") ? nth_arg(n, 2) : 1;
            auto ranked = rank(n, in, col, descending);
            if (nth > ranked.size()) fail(ExecError::Kind::nth_out_of_range, n, "position " + std::to_string(nth) + " of " + std::to_string(ranked.size()));
            return View{{ranked[nth - 1]}, &table_};
        }
        if (f == "count") return static_cast<double>(view_arg(n, 0).rows.size());
        if (f == "only") return view_arg(n, 0).rows.size() == 1;
        if (f == "hop") {
            View in = view_arg(n, 0);
            std::size_t col = column_arg(n, 1);
            if (in.rows.empty()) fail(ExecError::Kind::empty_view, n, "hop over an empty view");
            if (in.rows.size() > 1) fail(ExecError::Kind::exactly_one_row_required, n, "hop over " + std::to_string(in.rows.size()) + " rows");
            return table_.cell(in.rows.front(), col);
        }
        if (f == "max" || f == "min" || f == "sum" || f == "avg" || f == "nth_max" || f == "nth_min") {
            View in = view_arg(n, 0);
            std::size_t col = column_arg(n, 1);
            std::size_t nth = f.starts_with("nth_") ? nth_arg(n, 2) : 1;
            if (in.rows.empty()) {
                if (f == "sum") return 0.0;
                fail(ExecError::Kind::empty_view, n, f + " over an empty view");
            }
            std::vector<double> values;
            for (auto r : in.rows) {
                if (const auto& c = table_.cell(r, col); c.number) values.push_back(*c.number);
            }
            if (values.empty()) fail(ExecError::Kind::non_numeric_column, n, "column '" + table_.columns()[col] + "' has no numeric cells");
            if (f == "sum") return std::accumulate(values.begin(), values.end(), 0.0);
            if (f == "avg") return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
            bool descending = f.ends_with("max");
            std::stable_sort(values.begin(), values.end(), [&](double a, double b) { return descending ? a > b : a < b; });
            if (nth > values.size()) fail(ExecError::Kind::nth_out_of_range, n, "position " + std::to_string(nth) + " of " + std::to_string(values.size()));
            return values[nth - 1];
        }
        if (f == "eq" || f == "not_eq" || f == "greater" || f == "less" || f == "round_eq" || f == "diff") {
            CellValue a = scalar_arg(n, 0);
            CellValue b = scalar_arg(n, 1);
            if (f == "eq") return values_match(a, b);
            if (f == "not_eq") return !values_match(a, b);
            if (f == "round_eq") {
                if (a.number && b.number) return std::abs(*a.number - *b.number) <= 0.05 * std::max(1.0, std::abs(*b.number));
                return values_match(a, b);
            }
            if (f == "diff") {
                if (!a.number || !b.number) fail(ExecError::Kind::non_numeric_column, n, "diff of non-numeric values");
                return *a.number - *b.number;
            }
            auto o = order(a, b);
            if (!o) return false;
            return f == "greater" ? *o > 0 : *o < 0;
        }
        if (f == "and") return bool_arg(n, 0) && bool_arg(n, 1);
        if (f.starts_with("all_") || f.starts_with("most_")) {
            View in = view_arg(n, 0);
            std::size_t col = column_arg(n, 1);
            CellValue lit = literal_arg(n, 2);
            if (in.rows.empty()) fail(ExecError::Kind::empty_view, n, f + " over an empty view");
            std::string_view op = std::string_view(f).substr(f.find('_') + 1);
            std::size_t hits = 0;
            for (auto r : in.rows) hits += compare(op, table_.cell(r, col), lit) ? 1 : 0;
            if (f.starts_with("all_")) return hits == in.rows.size();
            return 2 * hits > in.rows.size();
        }
        fail(ExecError::Kind::type_error, n, "unknown function '" + f + "'");
    }

private:
    [[noreturn]] void fail(ExecError::Kind kind, const LfNode& n, const std::string& detail) const {
        throw ExecError(kind, print_lf(n), detail);
    }

    void need_args(const LfNode& n, std::size_t i) const {
        if (n.args.size() <= i) fail(ExecError::Kind::type_error, n, "missing argument " + std::to_string(i + 1));
    }

    View view_arg(const LfNode& n, std::size_t i) {
        need_args(n, i);
        ExecValue v = eval(n.args[i]);
        if (auto* view = std::get_if<View>(&v)) return std::move(*view);
        fail(ExecError::Kind::type_error, n.args[i], "expected a view");
    }

    std::size_t column_arg(const LfNode& n, std::size_t i) {
        need_args(n, i);
        const LfNode& a = n.args[i];
        if (!a.is_literal()) fail(ExecError::Kind::type_error, a, "expected a column name");
        auto idx = table_.column_index(a.name);
        if (!idx) fail(ExecError::Kind::column_not_found, a, "no column '" + a.name + "'");
        return *idx;
    }

    CellValue literal_arg(const LfNode& n, std::size_t i) {
        need_args(n, i);
        const LfNode& a = n.args[i];
        if (!a.is_literal()) fail(ExecError::Kind::type_error, a, "expected a literal value");
        return parse_cell(a.name);
    }

    CellValue scalar_arg(const LfNode& n, std::size_t i) {
        need_args(n, i);
        ExecValue v = eval(n.args[i]);
        if (auto* d = std::get_if<double>(&v)) return number_cell(*d);
        if (auto* c = std::get_if<CellValue>(&v)) return std::move(*c);
        fail(ExecError::Kind::type_error, n.args[i], "expected a value");
    }

    bool bool_arg(const LfNode& n, std::size_t i) {
        need_args(n, i);
        ExecValue v = eval(n.args[i]);
        if (auto* b = std::get_if<bool>(&v)) return *b;
        fail(ExecError::Kind::type_error, n.args[i], "expected a truth value");
    }

    std::size_t nth_arg(const LfNode& n, std::size_t i) {
        CellValue c = scalar_arg(n, i);
        if (!c.number) fail(ExecError::Kind::type_error, n.args[i], "expected an ordinal number");
        double v = std::floor(*c.number);
        if (v < 1) fail(ExecError::Kind::nth_out_of_range, n, "position " + c.raw);
        return static_cast<std::size_t>(v);
    }

    // Rows of `in` ordered by column value (numbers if the column has any,
    // else dates); ties keep table order.
    std::vector<std::size_t> rank(const LfNode& n, const View& in, std::size_t col, bool descending) const {
        if (in.rows.empty()) fail(ExecError::Kind::empty_view, n, n.name + " over an empty view");
        bool any_number = false;
        bool any_date = false;
        for (auto r : in.rows) {
            any_number |= table_.cell(r, col).number.has_value();
            any_date |= table_.cell(r, col).date.has_value();
        }
        if (!any_number && !any_date) fail(ExecError::Kind::non_numeric_column, n, "column '" + table_.columns()[col] + "' is not ordered");
        bool years = true;
        if (!any_number) {
            for (auto r : in.rows) {
                if (const auto& d = table_.cell(r, col).date; d && !d->year) years = false;
            }
        }
        std::vector<std::pair<double, std::size_t>> keyed;
        for (auto r : in.rows) {
            const auto& c = table_.cell(r, col);
            if (any_number && c.number) keyed.emplace_back(*c.number, r);
            if (!any_number && c.date) keyed.emplace_back(date_key(*c.date, years), r);
        }
        std::stable_sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
            return descending ? a.first > b.first : a.first < b.first;
        });
        std::vector<std::size_t> out;
        for (const auto& k : keyed) out.push_back(k.second);
        return out;
    }

    static bool compare(std::string_view op, const CellValue& cell, const CellValue& lit) {
        if (op == "eq") return values_match(cell, lit);
        if (op == "not_eq") return !values_match(cell, lit);
        auto o = order(cell, lit);
        if (!o) return false;
        if (op == "greater") return *o > 0;
        if (op == "less") return *o < 0;
        if (op == "greater_eq") return *o >= 0;
        if (op == "less_eq") return *o <= 0;
        return false;
    }

    const Table& table_;
};

}  // namespace

bool values_match(const CellValue& cell, const CellValue& literal) {
    std::string a = match_key(cell.raw);
    std::string b = match_key(literal.raw);
    if (a.empty() || b.empty()) return false;
    if (cell.number && literal.number) {
        double scale = std::max({1.0, std::abs(*cell.number), std::abs(*literal.number)});
        return std::abs(*cell.number - *literal.number) <= 1e-9 * scale;
    }
    if (cell.date && literal.date) return order(cell, literal) == 0;
    return a.find(b) != std::string::npos || b.find(a) != std::string::npos;
}

ExecValue execute_lf(const LfNode& ast, const Table& table) { return Evaluator(table).eval(ast); }

// ---------------------------------------------------------------------------
// Topic classification
// ---------------------------------------------------------------------------

namespace {

void collect(const LfNode& n, std::set<std::string>& names, bool& comparative) {
    if (!n.is_apply()) return;
    names.insert(n.name);
    if ((n.name == "greater" || n.name == "less" || n.name == "diff") && n.args.size() == 2 && n.args[0].is("hop") &&
        n.args[1].is("hop")) {
        comparative = true;
    }
    for (const auto& a : n.args) collect(a, names, comparative);
}

}  // namespace

LogicType classify_lf_topic(const LfNode& ast) {
    std::set<std::string> names;
    bool comparative = false;
    collect(ast, names, comparative);
    auto any = [&](auto pred) { return std::any_of(names.begin(), names.end(), pred); };
    if (any([](const std::string& s) { return s.starts_with("most_") || (s.starts_with("all_") && s != "all_rows"); })) {
        return LogicType::majority;
    }
    if (any([](const std::string& s) { return s.starts_with("nth_"); })) return LogicType::ordinal;
    if (names.count("only")) return LogicType::unique;
    if (names.count("sum") || names.count("avg")) return LogicType::aggregation;
    if (names.count("argmax") || names.count("argmin") || names.count("max") || names.count("min")) {
        return LogicType::superlative;
    }
    if (comparative) return LogicType::comparative;
    return LogicType::count;
}

std::string format_number(double value) {
    if (std::abs(value - std::round(value)) < 1e-9) {
        long long v = std::llround(value);
        return std::to_string(v);
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", value);
    std::string s = buf;
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    if (s == "-0") s = "0";
    return s;
}

}  // namespace logicloom
