#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "logicloom/error.hpp"

namespace logicloom {

enum class CellKind { number, date, text };

/// Calendar date; year is 0 when the cell did not carry one ("august 12").
struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    bool operator==(const Date&) const = default;
};

struct CellValue {
    std::string raw;
    CellKind kind = CellKind::text;
    std::optional<double> number;
    std::optional<Date> date;

    bool operator==(const CellValue&) const = default;
};

/// Types a raw cell. Total: anything that is neither a date nor contains a
/// numeral is text. Dates are tried first; numbers take the first numeral.
CellValue parse_cell(std::string_view raw);

/// Lowercase, trim, collapse internal whitespace.
std::string normalize_column(std::string_view name);

class Table {
public:
    Table() = default;

    /// Normalizes column names and types every cell. Throws InputError when
    /// there are no columns, duplicate columns, or a row of the wrong width.
    Table(std::string id, std::string caption, std::vector<std::string> columns,
          const std::vector<std::vector<std::string>>& rows);

    const std::string& id() const { return id_; }
    const std::string& caption() const { return caption_; }
    const std::vector<std::string>& columns() const { return columns_; }
    const std::vector<std::vector<CellValue>>& rows() const { return rows_; }
    std::size_t row_count() const { return rows_.size(); }
    std::size_t column_count() const { return columns_.size(); }
    const CellValue& cell(std::size_t row, std::size_t col) const { return rows_[row][col]; }

    /// Index of the column whose normalized name equals normalize_column(name).
    std::optional<std::size_t> column_index(std::string_view name) const;

    /// Dedup key: caption, columns and raw rows, order-sensitive.
    std::string content_key() const;

    bool operator==(const Table& other) const { return content_key() == other.content_key() && id_ == other.id_; }

private:
    std::string id_;
    std::string caption_;
    std::vector<std::string> columns_;
    std::vector<std::vector<CellValue>> rows_;
};

enum class LogicType { count, comparative, superlative, unique, ordinal, aggregation, majority };

inline constexpr std::array<LogicType, 7> kLogicTypes = {
    LogicType::count,   LogicType::comparative, LogicType::superlative, LogicType::unique,
    LogicType::ordinal, LogicType::aggregation, LogicType::majority,
};

std::string_view to_string(LogicType type);
/// Case-insensitive; throws InputError for names outside the closed set.
LogicType logic_type_from_string(std::string_view name);

struct SupervisedInstance {
    LogicType logic_type = LogicType::count;
    std::string table_id;
    std::string lf;
    std::string text;

    bool operator==(const SupervisedInstance&) const = default;
};

struct Corpus {
    std::map<std::string, Table> tables;
    std::vector<SupervisedInstance> instances;
    std::vector<std::string> warnings;
    std::size_t dropped = 0;

    const Table& table(const std::string& id) const;
};

enum class TableFormat { csv_dir, json };

/// Reads a single RFC-4180 CSV file (header row required) as a table whose id
/// is the file stem. Short rows are padded with empty cells and noted in
/// `warnings`; long rows are truncated likewise.
Table load_csv_table(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr,
                     std::string caption = {});

/// Tables only. csv-dir: every *.csv in the directory (sorted by name). json:
/// an array of {"id","caption","columns","rows"} objects, bare or under a
/// "tables" key.
Corpus load_tables(const std::filesystem::path& path, TableFormat format);

/// Maps roles to dataset JSON field names.
struct FieldMap {
    std::string caption = "topic";
    std::string headers = "table_header";
    std::string rows = "table_cont";
    std::string logic_type = "action";
    std::string lf = "logic_str";
    std::string text = "sent";
    /// Optional; when present in an object it names the table, otherwise ids
    /// are assigned in order of first appearance.
    std::string table_id = "table_id";
    /// Function renames applied to the surface LF before parsing (the public
    /// release spells typed variants such as str_eq / num_hop).
    std::map<std::string, std::string> function_aliases = default_aliases();

    static std::map<std::string, std::string> default_aliases();
    static FieldMap from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Loads a dataset JSON array of instance objects. Identical tables are
/// shared; instances with missing fields or unparseable LFs are dropped and
/// counted in `dropped` with one warning each.
Corpus load_dataset(const std::filesystem::path& path, const FieldMap& field_map = {});
Corpus load_dataset_json(const nlohmann::json& array, const FieldMap& field_map = {});

/// Flattens a corpus back into the dataset layout described by field_map.
nlohmann::json dataset_to_json(const Corpus& corpus, const FieldMap& field_map = {});

/// Stable export schema: {"schema_version":1,"tables":[...],"instances":[...]}.
nlohmann::json corpus_to_json(const Corpus& corpus);
Corpus corpus_from_json(const nlohmann::json& j);

nlohmann::json table_to_json(const Table& table);
Table table_from_json(const nlohmann::json& j, std::vector<std::string>* warnings = nullptr);

/// Per-type quotas for drawing `n` of the instances in proportion to their
/// logic types (largest remainder; ties go to the earlier type).
std::map<LogicType, std::size_t> stratified_quotas(const Corpus& corpus, std::size_t n);

/// Draws `n` instances by stratified_quotas under `seed`, keeping corpus order
/// and every table. Throws InputError when n exceeds the corpus.
Corpus stratified_sample(const Corpus& corpus, std::size_t n, std::uint64_t seed);

}  // namespace logicloom
