#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "logicloom/error.hpp"
#include "logicloom/table.hpp"

namespace logicloom {

// ---------------------------------------------------------------------------
// Syntax tree and function registry
// ---------------------------------------------------------------------------

/// Argument and return types of the logical-form functions.
enum class ValueType { view, column, value, number, object, boolean };

std::string_view to_string(ValueType type);

struct FunctionSig {
    std::string_view name;
    std::vector<ValueType> arg_types;
    ValueType return_type;
    std::vector<LogicType> topic_tags;
};

/// The closed registry, in declaration order.
std::span<const FunctionSig> function_registry();
/// nullptr when `name` is not a registered function.
const FunctionSig* find_function(std::string_view name);

/// A node is either a function application or a literal token run. `all_rows`
/// is an application with no arguments.
struct LfNode {
    enum class Kind { apply, literal };

    Kind kind = Kind::literal;
    /// Function name, or the literal's tokens joined by single spaces.
    std::string name;
    std::vector<LfNode> args;

    static LfNode apply(std::string function, std::vector<LfNode> args = {});
    static LfNode literal(std::string_view text);

    bool is_apply() const { return kind == Kind::apply; }
    bool is_literal() const { return kind == Kind::literal; }
    bool is(std::string_view function) const { return is_apply() && name == function; }
};

bool operator==(const LfNode& a, const LfNode& b);

/// Number of nodes on the longest root-to-leaf path (literals included).
int lf_depth(const LfNode& node);

class ParseError : public InputError {
public:
    enum class Kind { empty, unknown_function, arity_mismatch, unbalanced_braces, dangling_separator, unexpected_token };

    ParseError(Kind kind, std::string message, std::size_t offset, std::size_t length);

    Kind kind() const { return kind_; }
    /// Byte span of the offending text in the parsed input.
    std::size_t offset() const { return offset_; }
    std::size_t length() const { return length_; }

private:
    Kind kind_;
    std::size_t offset_;
    std::size_t length_;
};

/// Parses `f { a ; b ; ... }`. Registry membership and arity are checked here.
LfNode parse_lf(std::string_view surface);

/// Canonical surface form: single spaces around braces and separators.
std::string print_lf(const LfNode& node);

/// parse+print when the text parses, otherwise the trimmed text.
std::string canonical_lf(std::string_view surface);

// ---------------------------------------------------------------------------
// Type checking
// ---------------------------------------------------------------------------

struct Violation {
    enum class Kind { type_mismatch, unknown_column };

    Kind kind;
    /// Canonical print of the offending subtree.
    std::string subtree;
    std::string message;
};

struct ValidityReport {
    std::vector<Violation> violations;
    ValueType root_type = ValueType::value;

    bool structurally_valid() const;
    /// Structurally valid and every column literal names a table column.
    bool table_valid() const { return violations.empty(); }

    nlohmann::json to_json() const;
};

/// Type check against the registry; column check too when `table` is given.
ValidityReport validate_lf(const LfNode& ast, const Table* table = nullptr);
inline ValidityReport validate_lf(const LfNode& ast, const Table& table) { return validate_lf(ast, &table); }

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// Ordered, duplicate-free row selection over one table.
struct View {
    std::vector<std::size_t> rows;
    const Table* table = nullptr;

    bool operator==(const View& o) const { return rows == o.rows && table == o.table; }
};

using ExecValue = std::variant<bool, double, CellValue, View>;

nlohmann::json exec_value_to_json(const ExecValue& value);

class ExecError : public Error {
public:
    enum class Kind {
        column_not_found,
        empty_view,
        exactly_one_row_required,
        nth_out_of_range,
        non_numeric_column,
        type_error,
    };

    ExecError(Kind kind, std::string subtree, std::string detail);

    Kind kind() const { return kind_; }
    /// Canonical print of the subtree that failed.
    const std::string& subtree() const { return subtree_; }

private:
    Kind kind_;
    std::string subtree_;
};

std::string_view to_string(ExecError::Kind kind);

ExecValue execute_lf(const LfNode& ast, const Table& table);

/// True when both values compare equal under the cell matching rules
/// (numeric, then date, then case-insensitive containment).
bool values_match(const CellValue& cell, const CellValue& literal);

// ---------------------------------------------------------------------------
// Topic classification, sampling, realization
// ---------------------------------------------------------------------------

LogicType classify_lf_topic(const LfNode& ast);

class SamplingExhausted : public Error {
public:
    using Error::Error;
};

struct SampleOptions {
    int max_retries = 400;
};

/// Draws an LF over `table` that classifies as `topic` and executes to true.
/// Deterministic for fixed arguments.
LfNode sample_lf(const Table& table, LogicType topic, std::uint64_t seed, int depth_budget,
                 const SampleOptions& options = {});

/// Fills a per-topic English template. Total on structurally valid ASTs.
std::string realize_template(const LfNode& ast, const Table& table);

/// Formats a number the way LF literals spell it ("11", "10.5", "2.33").
std::string format_number(double value);

}  // namespace logicloom
