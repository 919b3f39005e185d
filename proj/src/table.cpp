#include "logicloom/table.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "logicloom/lf.hpp"
#include "logicloom/text.hpp"

namespace logicloom {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

constexpr std::array<std::string_view, 12> kMonths = {
    "january", "february", "march",     "april",   "may",      "june",
    "july",    "august",   "september", "october", "november", "december",
};

int month_from_name(std::string_view token) {
    if (!token.empty() && token.back() == '.') token.remove_suffix(1);
    if (token.size() < 3) return 0;
    for (std::size_t m = 0; m < kMonths.size(); ++m) {
        if (token == kMonths[m] || token == kMonths[m].substr(0, 3)) return static_cast<int>(m) + 1;
    }
    if (token == "sept") return 9;
    return 0;
}

std::optional<int> small_int(std::string_view token, std::size_t max_len) {
    if (token.empty() || token.size() > max_len) return std::nullopt;
    int v = 0;
    for (char c : token) {
        if (!is_digit(c)) return std::nullopt;
        v = v * 10 + (c - '0');
    }
    return v;
}

// Splits on whitespace and isolates ',' and '-' so "august 12, 1991" and
// "1991-08-12" tokenize like their spaced forms.
std::vector<std::string> date_tokens(std::string_view raw) {
    std::string spaced;
    for (char c : raw) {
        if (c == ',' || c == '-') {
            spaced += ' ';
            spaced += c;
            spaced += ' ';
        } else {
            spaced += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    return split_whitespace(spaced);
}

std::optional<Date> parse_date(std::string_view raw) {
    auto t = date_tokens(raw);
    auto valid_day = [](std::optional<int> d) { return d && *d >= 1 && *d <= 31; };
    if (t.size() == 2 || t.size() == 4 || t.size() == 3) {
        int month = month_from_name(t[0]);
        if (month) {
            auto day = small_int(t[1], 2);
            if (!valid_day(day)) return std::nullopt;
            if (t.size() == 2) return Date{0, month, *day};
            std::optional<int> year;
            if (t.size() == 4 && t[2] == ",") year = small_int(t[3], 4);
            if (t.size() == 3) year = small_int(t[2], 4);
            if (year && t[t.size() - 1].size() == 4) return Date{*year, month, *day};
            return std::nullopt;
        }
    }
    if (t.size() == 5 && t[1] == "-" && t[3] == "-" && t[0].size() == 4) {
        auto year = small_int(t[0], 4);
        auto month = small_int(t[2], 2);
        auto day = small_int(t[4], 2);
        if (year && month && *month >= 1 && *month <= 12 && valid_day(day)) return Date{*year, *month, *day};
    }
    return std::nullopt;
}

// Removes thousands separators (a comma followed by exactly three digits) and
// currency / percent symbols.
std::string strip_numeric_noise(std::string_view raw) {
    std::string out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (c == ',' && i > 0 && is_digit(raw[i - 1]) && i + 3 < raw.size() && is_digit(raw[i + 1]) &&
            is_digit(raw[i + 2]) && is_digit(raw[i + 3]) && (i + 4 == raw.size() || !is_digit(raw[i + 4]))) {
            continue;
        }
        if (c == '$' || c == '%') continue;
        // UTF-8 euro / pound / yen signs.
        if (static_cast<unsigned char>(c) == 0xE2 && i + 2 < raw.size() && static_cast<unsigned char>(raw[i + 1]) == 0x82 &&
            static_cast<unsigned char>(raw[i + 2]) == 0xAC) {
            i += 2;
            continue;
        }
        if (static_cast<unsigned char>(c) == 0xC2 && i + 1 < raw.size() &&
            (static_cast<unsigned char>(raw[i + 1]) == 0xA3 || static_cast<unsigned char>(raw[i + 1]) == 0xA5)) {
            i += 1;
            continue;
        }
        out += c;
    }
    return out;
}

std::optional<double> first_numeral(std::string_view s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!is_digit(s[i])) continue;
        std::size_t start = i;
        bool negative = start > 0 && s[start - 1] == '-' &&
                        (start == 1 || std::isspace(static_cast<unsigned char>(s[start - 2])) || s[start - 2] == '(');
        std::size_t j = i;
        while (j < s.size() && is_digit(s[j])) ++j;
        if (j + 1 < s.size() && s[j] == '.' && is_digit(s[j + 1])) {
            ++j;
            while (j < s.size() && is_digit(s[j])) ++j;
        }
        double v = std::stod(std::string(s.substr(start, j - start)));
        return negative ? -v : v;
    }
    return std::nullopt;
}

std::string key_of(const std::string& caption, const std::vector<std::string>& columns,
                   const std::vector<std::vector<std::string>>& rows) {
    nlohmann::json j = {caption, columns, rows};
    return j.dump();
}

}  // namespace

CellValue parse_cell(std::string_view raw) {
    CellValue cell;
    cell.raw = std::string(raw);
    if (auto date = parse_date(raw)) {
        cell.kind = CellKind::date;
        cell.date = date;
        return cell;
    }
    if (auto num = first_numeral(strip_numeric_noise(raw))) {
        cell.kind = CellKind::number;
        cell.number = num;
        return cell;
    }
    return cell;
}

std::string normalize_column(std::string_view name) { return join(split_whitespace(to_lower(name))); }

Table::Table(std::string id, std::string caption, std::vector<std::string> columns,
             const std::vector<std::vector<std::string>>& rows)
    : id_(std::move(id)), caption_(std::move(caption)) {
    if (columns.empty()) throw InputError("table '" + id_ + "' has no columns");
    std::set<std::string> seen;
    for (auto& c : columns) {
        c = normalize_column(c);
        if (!seen.insert(c).second) throw InputError("table '" + id_ + "' has duplicate column '" + c + "'");
    }
    columns_ = std::move(columns);
    rows_.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != columns_.size()) {
            throw InputError("table '" + id_ + "' row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                             " cells, expected " + std::to_string(columns_.size()));
        }
        std::vector<CellValue> cells;
        cells.reserve(rows[r].size());
        for (const auto& raw : rows[r]) cells.push_back(parse_cell(raw));
        rows_.push_back(std::move(cells));
    }
}

std::optional<std::size_t> Table::column_index(std::string_view name) const {
    auto norm = normalize_column(name);
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (columns_[i] == norm) return i;
    }
    return std::nullopt;
}

std::string Table::content_key() const {
    std::vector<std::vector<std::string>> raw;
    raw.reserve(rows_.size());
    for (const auto& row : rows_) {
        std::vector<std::string> r;
        for (const auto& c : row) r.push_back(c.raw);
        raw.push_back(std::move(r));
    }
    return key_of(caption_, columns_, raw);
}

std::string_view to_string(LogicType type) {
    switch (type) {
        case LogicType::count: return "count";
        case LogicType::comparative: return "comparative";
        case LogicType::superlative: return "superlative";
        case LogicType::unique: return "unique";
        case LogicType::ordinal: return "ordinal";
        case LogicType::aggregation: return "aggregation";
        case LogicType::majority: return "majority";
    }
    return "count";
}

LogicType logic_type_from_string(std::string_view name) {
    auto lower = to_lower(trim(name));
    for (auto t : kLogicTypes) {
        if (to_string(t) == lower) return t;
    }
    throw InputError("unknown logic type '" + std::string(name) + "'");
}

const Table& Corpus::table(const std::string& id) const {
    auto it = tables.find(id);
    if (it == tables.end()) throw InputError("unknown table id '" + id + "'");
    return it->second;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text, const std::string& name) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t i = 0;
    if (text.starts_with("\xEF\xBB\xBF")) i = 3;
    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
        record.clear();
    };
    for (; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
            end_record();
        } else if (c == '\n') {
            end_record();
        } else {
            field += c;
            field_started = true;
        }
    }
    if (quoted) throw InputError("'" + name + "': unterminated quoted field");
    if (field_started || !record.empty()) end_record();
    return records;
}

void rectangularize(std::vector<std::vector<std::string>>& rows, std::size_t width, const std::string& id,
                    std::vector<std::string>* warnings) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() == width) continue;
        if (warnings) {
            warnings->push_back("table '" + id + "' row " + std::to_string(r) + " has " +
                                std::to_string(rows[r].size()) + " cells, expected " + std::to_string(width) +
                                (rows[r].size() < width ? "; padded" : "; truncated"));
        }
        rows[r].resize(width);
    }
}

}  // namespace

Table load_csv_table(const std::filesystem::path& path, std::vector<std::string>* warnings, std::string caption) {
    auto records = parse_csv(read_file(path), path.string());
    std::string id = path.stem().string();
    if (records.empty() || records[0].empty() || (records[0].size() == 1 && trim(records[0][0]).empty())) {
        throw InputError("'" + path.string() + "' has no header row");
    }
    auto header = records.front();
    records.erase(records.begin());
    rectangularize(records, header.size(), id, warnings);
    if (caption.empty()) {
        caption = id;
        std::replace(caption.begin(), caption.end(), '_', ' ');
    }
    return Table(id, caption, header, records);
}

nlohmann::json table_to_json(const Table& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : table.rows()) {
        nlohmann::json r = nlohmann::json::array();
        for (const auto& c : row) r.push_back(c.raw);
        rows.push_back(std::move(r));
    }
    return {{"id", table.id()}, {"caption", table.caption()}, {"columns", table.columns()}, {"rows", rows}};
}

Table table_from_json(const nlohmann::json& j, std::vector<std::string>* warnings) {
    if (!j.is_object()) throw InputError("table entry is not an object");
    try {
        auto id = j.at("id").get<std::string>();
        auto columns = j.at("columns").get<std::vector<std::string>>();
        auto rows = j.value("rows", std::vector<std::vector<std::string>>{});
        if (columns.empty()) throw InputError("table '" + id + "' has no columns");
        rectangularize(rows, columns.size(), id, warnings);
        return Table(id, j.value("caption", std::string{}), columns, rows);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed table object: ") + e.what());
    }
}

Corpus load_tables(const std::filesystem::path& path, TableFormat format) {
    Corpus corpus;
    auto add = [&](Table t) {
        auto id = t.id();
        if (!corpus.tables.emplace(id, std::move(t)).second) throw InputError("duplicate table id '" + id + "'");
    };
    if (format == TableFormat::csv_dir) {
        if (!std::filesystem::is_directory(path)) throw InputError("'" + path.string() + "' is not a directory");
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(path)) {
            if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) add(load_csv_table(f, &corpus.warnings));
        return corpus;
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("'" + path.string() + "': " + e.what());
    }
    if (j.is_object() && j.contains("tables")) j = j["tables"];
    if (!j.is_array()) throw InputError("'" + path.string() + "': expected a JSON array of tables");
    for (std::size_t i = 0; i < j.size(); ++i) {
        auto obj = j[i];
        if (obj.is_object() && !obj.contains("id")) obj["id"] = "table_" + std::to_string(i);
        add(table_from_json(obj, &corpus.warnings));
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

std::map<std::string, std::string> FieldMap::default_aliases() {
    return {
        {"str_eq", "eq"},
        {"not_str_eq", "not_eq"},
        {"str_hop", "hop"},
        {"num_hop", "hop"},
        {"filter_str_eq", "filter_eq"},
        {"filter_str_not_eq", "filter_not_eq"},
        {"all_str_eq", "all_eq"},
        {"all_str_not_eq", "all_not_eq"},
        {"most_str_eq", "most_eq"},
        {"most_str_not_eq", "most_not_eq"},
    };
}

FieldMap FieldMap::from_json(const nlohmann::json& j) {
    FieldMap m;
    if (!j.is_object()) throw InputError("field_map must be an object");
    m.caption = j.value("caption", m.caption);
    m.headers = j.value("headers", m.headers);
    m.rows = j.value("rows", m.rows);
    m.logic_type = j.value("logic_type", m.logic_type);
    m.lf = j.value("lf", m.lf);
    m.text = j.value("text", m.text);
    m.table_id = j.value("table_id", m.table_id);
    if (j.contains("function_aliases")) m.function_aliases = j.at("function_aliases").get<std::map<std::string, std::string>>();
    return m;
}

nlohmann::json FieldMap::to_json() const {
    return {{"caption", caption}, {"headers", headers}, {"rows", rows},   {"logic_type", logic_type},
            {"lf", lf},           {"text", text},       {"table_id", table_id}, {"function_aliases", function_aliases}};
}

namespace {

// The public release suffixes every LF with "= true".
std::string prepare_lf(std::string lf, const std::map<std::string, std::string>& aliases) {
    lf = trim(lf);
    auto eq = lf.rfind('=');
    if (eq != std::string::npos && eq > 0 && lf.find('}', eq) == std::string::npos && lf[eq - 1] != '_') {
        auto tail = to_lower(trim(std::string_view(lf).substr(eq + 1)));
        if (tail == "true") lf = trim(std::string_view(lf).substr(0, eq));
    }
    if (aliases.empty()) return lf;
    std::string out;
    std::size_t i = 0;
    while (i < lf.size()) {
        if (std::isalnum(static_cast<unsigned char>(lf[i])) || lf[i] == '_') {
            std::size_t j = i;
            while (j < lf.size() && (std::isalnum(static_cast<unsigned char>(lf[j])) || lf[j] == '_')) ++j;
            std::string word = lf.substr(i, j - i);
            std::size_t k = j;
            while (k < lf.size() && std::isspace(static_cast<unsigned char>(lf[k]))) ++k;
            auto it = aliases.find(word);
            out += (it != aliases.end() && k < lf.size() && lf[k] == '{') ? it->second : word;
            i = j;
        } else {
            out += lf[i++];
        }
    }
    return out;
}

}  // namespace

Corpus load_dataset_json(const nlohmann::json& array, const FieldMap& fm) {
    if (!array.is_array()) throw InputError("dataset must be a JSON array of instance objects");
    Corpus corpus;
    std::map<std::string, std::string> id_by_key;
    std::size_t next_id = 0;
    for (std::size_t i = 0; i < array.size(); ++i) {
        const auto& obj = array[i];
        auto drop = [&](const std::string& why) {
            corpus.warnings.push_back("instance " + std::to_string(i) + ": " + why + "; dropped");
            ++corpus.dropped;
        };
        if (!obj.is_object()) {
            drop("not an object");
            continue;
        }
        std::string missing;
        for (const auto* field : {&fm.caption, &fm.headers, &fm.rows, &fm.logic_type, &fm.lf, &fm.text}) {
            if (!obj.contains(*field) || obj.at(*field).is_null()) {
                missing = *field;
                break;
            }
        }
        if (!missing.empty()) {
            drop("missing field '" + missing + "'");
            continue;
        }
        SupervisedInstance inst;
        std::vector<std::string> headers;
        std::vector<std::vector<std::string>> rows;
        std::string caption;
        try {
            caption = obj.at(fm.caption).get<std::string>();
            headers = obj.at(fm.headers).get<std::vector<std::string>>();
            rows = obj.at(fm.rows).get<std::vector<std::vector<std::string>>>();
            inst.logic_type = logic_type_from_string(obj.at(fm.logic_type).get<std::string>());
            inst.text = trim(obj.at(fm.text).get<std::string>());
            inst.lf = obj.at(fm.lf).get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            drop(std::string("malformed field: ") + e.what());
            continue;
        } catch (const InputError& e) {
            drop(e.what());
            continue;
        }
        try {
            inst.lf = print_lf(parse_lf(prepare_lf(inst.lf, fm.function_aliases)));
        } catch (const ParseError& e) {
            drop(std::string("unparseable logical form: ") + e.what());
            continue;
        }
        if (headers.empty()) {
            drop("table has no columns");
            continue;
        }
        std::vector<std::string> padded_warnings;
        rectangularize(rows, headers.size(), "instance " + std::to_string(i), &padded_warnings);
        Table probe;
        try {
            probe = Table("", caption, headers, rows);
        } catch (const InputError& e) {
            drop(e.what());
            continue;
        }
        auto key = probe.content_key();
        auto found = id_by_key.find(key);
        if (found == id_by_key.end()) {
            std::string id;
            if (obj.contains(fm.table_id) && obj.at(fm.table_id).is_string()) id = obj.at(fm.table_id).get<std::string>();
            if (id.empty() || corpus.tables.count(id)) {
                do {
                    id = "t" + std::to_string(next_id++);
                } while (corpus.tables.count(id));
            }
            corpus.tables.emplace(id, Table(id, caption, probe.columns(), rows));
            found = id_by_key.emplace(key, id).first;
            corpus.warnings.insert(corpus.warnings.end(), padded_warnings.begin(), padded_warnings.end());
        }
        inst.table_id = found->second;
        corpus.instances.push_back(std::move(inst));
    }
    return corpus;
}

Corpus load_dataset(const std::filesystem::path& path, const FieldMap& field_map) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError("'" + path.string() + "': " + e.what());
    }
    return load_dataset_json(j, field_map);
}

nlohmann::json dataset_to_json(const Corpus& corpus, const FieldMap& fm) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& inst : corpus.instances) {
        const auto& t = corpus.table(inst.table_id);
        auto tj = table_to_json(t);
        nlohmann::json obj;
        obj[fm.table_id] = t.id();
        obj[fm.caption] = t.caption();
        obj[fm.headers] = tj["columns"];
        obj[fm.rows] = tj["rows"];
        obj[fm.logic_type] = std::string(to_string(inst.logic_type));
        obj[fm.lf] = inst.lf;
        obj[fm.text] = inst.text;
        out.push_back(std::move(obj));
    }
    return out;
}

nlohmann::json corpus_to_json(const Corpus& corpus) {
    nlohmann::json tables = nlohmann::json::array();
    for (const auto& [id, t] : corpus.tables) tables.push_back(table_to_json(t));
    nlohmann::json instances = nlohmann::json::array();
    for (const auto& inst : corpus.instances) {
        instances.push_back({{"logic_type", std::string(to_string(inst.logic_type))},
                             {"table_id", inst.table_id},
                             {"lf", inst.lf},
                             {"text", inst.text}});
    }
    return {{"schema_version", 1}, {"tables", tables}, {"instances", instances}};
}

Corpus corpus_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("schema_version", 0) != 1) throw InputError("not a corpus export (schema_version 1)");
    Corpus corpus;
    try {
        for (const auto& tj : j.at("tables")) {
            auto t = table_from_json(tj, &corpus.warnings);
            auto id = t.id();
            if (!corpus.tables.emplace(id, std::move(t)).second) throw InputError("duplicate table id '" + id + "'");
        }
        for (const auto& ij : j.at("instances")) {
            SupervisedInstance inst;
            inst.logic_type = logic_type_from_string(ij.at("logic_type").get<std::string>());
            inst.table_id = ij.at("table_id").get<std::string>();
            inst.lf = ij.at("lf").get<std::string>();
            inst.text = ij.at("text").get<std::string>();
            if (!corpus.tables.count(inst.table_id)) throw InputError("instance references unknown table '" + inst.table_id + "'");
            corpus.instances.push_back(std::move(inst));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed corpus export: ") + e.what());
    }
    return corpus;
}

std::map<LogicType, std::size_t> stratified_quotas(const Corpus& corpus, std::size_t n) {
    std::size_t total = corpus.instances.size();
    if (n > total) {
        throw InputError("cannot sample " + std::to_string(n) + " of " + std::to_string(total) + " instances");
    }
    std::map<LogicType, std::size_t> counts;
    for (auto t : kLogicTypes) counts[t] = 0;
    for (const auto& inst : corpus.instances) ++counts[inst.logic_type];
    std::map<LogicType, std::size_t> quotas;
    std::vector<std::pair<std::size_t, LogicType>> remainders;  // numerator of the fractional part
    std::size_t assigned = 0;
    for (auto t : kLogicTypes) {
        std::size_t scaled = counts[t] * n;
        quotas[t] = total ? scaled / total : 0;
        assigned += quotas[t];
        remainders.emplace_back(total ? scaled % total : 0, t);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < n; ++i) {
        ++quotas[remainders[i % remainders.size()].second];
        ++assigned;
    }
    return quotas;
}

Corpus stratified_sample(const Corpus& corpus, std::size_t n, std::uint64_t seed) {
    auto quotas = stratified_quotas(corpus, n);
    std::mt19937_64 rng(seed);
    std::vector<bool> keep(corpus.instances.size(), false);
    for (auto t : kLogicTypes) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < corpus.instances.size(); ++i) {
            if (corpus.instances[i].logic_type == t) idx.push_back(i);
        }
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t k = 0; k < quotas[t]; ++k) keep[idx[k]] = true;
    }
    Corpus out;
    out.tables = corpus.tables;
    for (std::size_t i = 0; i < corpus.instances.size(); ++i) {
        if (keep[i]) out.instances.push_back(corpus.instances[i]);
    }
    return out;
}

}  // namespace logicloom
