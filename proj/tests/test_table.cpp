#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "logicloom/table.hpp"
#include "logicloom/text.hpp"

using namespace logicloom;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("logicloom-test-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

nlohmann::json dataset_instance(const std::string& caption, const std::string& action, const std::string& lf,
                                const std::string& sent) {
    return {{"topic", caption},
            {"table_header", {"player", "goals"}},
            {"table_cont", nlohmann::json::array({nlohmann::json::array({"anna", "3"}), nlohmann::json::array({"bruno", "5"})})},
            {"action", action},
            {"logic_str", lf},
            {"sent", sent}};
}

}  // namespace

TEST(Text, TrimLowerSplitJoin) {
    EXPECT_EQ(trim("  a b \n"), "a b");
    EXPECT_EQ(to_lower("AbC"), "abc");
    EXPECT_EQ(split_whitespace(" a  b\tc "), (Tokens{"a", "b", "c"}));
    EXPECT_EQ(join({"a", "b"}, "-"), "a-b");
}

TEST(Text, MetricTokenizerSeparatesPunctuation) {
    MetricTokenizer t;
    EXPECT_EQ(t.tokenize("The Cat, (ran)."), (Tokens{"the", "cat", ",", "(", "ran", ")", "."}));
    EXPECT_EQ(t.tokenize("o'brien well-known"), (Tokens{"o'brien", "well-known"}));
    EXPECT_EQ(make_tokenizer("whitespace")->name(), "whitespace");
    EXPECT_THROW(make_tokenizer("bpe"), InputError);
}

TEST(Cell, NumbersDatesText) {
    auto n = parse_cell("$1,234.5");
    EXPECT_EQ(n.kind, CellKind::number);
    EXPECT_DOUBLE_EQ(*n.number, 1234.5);
    EXPECT_DOUBLE_EQ(*parse_cell("41.5%").number, 41.5);
    EXPECT_DOUBLE_EQ(*parse_cell("-3").number, -3);
    EXPECT_DOUBLE_EQ(*parse_cell("3 - 1").number, 3);
    auto d = parse_cell("august 12 , 2010");
    EXPECT_EQ(d.kind, CellKind::date);
    EXPECT_EQ(*d.date, (Date{2010, 8, 12}));
    EXPECT_EQ(*parse_cell("2010-08-12").date, (Date{2010, 8, 12}));
    EXPECT_EQ(*parse_cell("august 12").date, (Date{0, 8, 12}));
    EXPECT_EQ(parse_cell("boston red sox").kind, CellKind::text);
    EXPECT_EQ(parse_cell("").kind, CellKind::text);
}

TEST(TableModel, NormalizesColumnsAndRejectsBadShapes) {
    Table t("t", "cap", {" Player  Name ", "Goals"}, {{"anna", "3"}});
    EXPECT_EQ(t.columns(), (std::vector<std::string>{"player name", "goals"}));
    EXPECT_EQ(t.column_index("PLAYER name"), 0u);
    EXPECT_FALSE(t.column_index("team"));
    EXPECT_THROW(Table("t", "", {}, {}), InputError);
    EXPECT_THROW(Table("t", "", {"a", "A"}, {}), InputError);
    EXPECT_THROW(Table("t", "", {"a", "b"}, {{"1"}}), InputError);
}

TEST(TableModel, LogicTypeNames) {
    for (auto t : kLogicTypes) EXPECT_EQ(logic_type_from_string(to_string(t)), t);
    EXPECT_EQ(logic_type_from_string("Superlative"), LogicType::superlative);
    EXPECT_THROW(logic_type_from_string("temporal"), InputError);
}

TEST(Csv, QuotedFieldsAndRaggedRows) {
    auto dir = temp_dir("csv");
    {
        std::ofstream os(dir / "scores.csv");
        os << "player,\"club, city\",goals\r\n\"smith, j\",\"a \"\"b\"\"\",3\nshort,x\nlong,y,4,extra\n";
    }
    std::vector<std::string> warnings;
    Table t = load_csv_table(dir / "scores.csv", &warnings);
    EXPECT_EQ(t.id(), "scores");
    EXPECT_EQ(t.columns()[1], "club, city");
    ASSERT_EQ(t.row_count(), 3u);
    EXPECT_EQ(t.cell(0, 0).raw, "smith, j");
    EXPECT_EQ(t.cell(0, 1).raw, "a \"b\"");
    EXPECT_EQ(t.cell(1, 2).raw, "");
    EXPECT_EQ(t.cell(2, 2).raw, "4");
    EXPECT_EQ(warnings.size(), 2u);

    Corpus c = load_tables(dir, TableFormat::csv_dir);
    EXPECT_EQ(c.tables.size(), 1u);
    EXPECT_THROW(load_tables(dir / "missing", TableFormat::csv_dir), InputError);
    std::filesystem::remove_all(dir);
}

TEST(Json, TablesFileBareOrWrapped) {
    auto dir = temp_dir("tables");
    nlohmann::json tables = {{{"id", "a"}, {"caption", "c"}, {"columns", {"x"}}, {"rows", {{"1"}}}}};
    std::ofstream(dir / "bare.json") << tables.dump();
    std::ofstream(dir / "wrapped.json") << nlohmann::json{{"schema_version", 1}, {"tables", tables}}.dump();
    EXPECT_EQ(load_tables(dir / "bare.json", TableFormat::json).tables.at("a").caption(), "c");
    EXPECT_EQ(load_tables(dir / "wrapped.json", TableFormat::json).tables.size(), 1u);
    nlohmann::json dup = {tables[0], tables[0]};
    std::ofstream(dir / "dup.json") << dup.dump();
    EXPECT_THROW(load_tables(dir / "dup.json", TableFormat::json), InputError);
    std::filesystem::remove_all(dir);
}

TEST(Dataset, SharesIdenticalTablesAndDropsBadInstances) {
    nlohmann::json arr = nlohmann::json::array();
    arr.push_back(dataset_instance("cup", "count", "eq { count { all_rows } ; 2 } = true", "there are 2 players"));
    arr.push_back(dataset_instance("cup", "superlative",
                                   "str_eq { str_hop { argmax { all_rows ; goals } ; player } ; bruno }",
                                   "bruno scored the most goals"));
    arr.push_back(dataset_instance("other cup", "count", "eq { count { all_rows } ; 2 }", "two players"));
    arr.push_back(dataset_instance("cup", "count", "eq { count { all_rows ; 2 }", "broken"));
    arr.push_back(dataset_instance("cup", "temporal", "eq { count { all_rows } ; 2 }", "bad type"));
    auto missing = dataset_instance("cup", "count", "eq { count { all_rows } ; 2 }", "x");
    missing.erase("sent");
    arr.push_back(missing);
    arr.push_back(42);

    Corpus c = load_dataset_json(arr);
    ASSERT_EQ(c.instances.size(), 3u);
    EXPECT_EQ(c.tables.size(), 2u);
    EXPECT_EQ(c.dropped, 4u);
    EXPECT_EQ(c.warnings.size(), 4u);
    EXPECT_EQ(c.instances[0].table_id, c.instances[1].table_id);
    EXPECT_NE(c.instances[0].table_id, c.instances[2].table_id);
    EXPECT_EQ(c.instances[0].lf, "eq { count { all_rows } ; 2 }");
    EXPECT_EQ(c.instances[1].lf, "eq { hop { argmax { all_rows ; goals } ; player } ; bruno }");
    EXPECT_THROW(load_dataset_json(nlohmann::json::object()), InputError);
}

TEST(Dataset, CustomFieldMapAndExplicitIds) {
    FieldMap fm;
    fm.text = "sentence";
    fm.lf = "lf";
    nlohmann::json inst = {{"topic", "cup"},   {"table_header", {"a"}}, {"table_cont", nlohmann::json::array({nlohmann::json::array({"1"})})}, {"action", "count"},
                           {"lf", "eq { count { all_rows } ; 1 }"}, {"sentence", "one row"}, {"table_id", "my-table"}};
    Corpus c = load_dataset_json(nlohmann::json::array({inst}), fm);
    ASSERT_EQ(c.instances.size(), 1u);
    EXPECT_EQ(c.instances[0].table_id, "my-table");
    auto back = dataset_to_json(c, fm);
    EXPECT_EQ(back[0]["sentence"], "one row");
    EXPECT_EQ(FieldMap::from_json(fm.to_json()).text, "sentence");
}

TEST(Corpus, JsonRoundTrip) {
    Corpus c;
    c.tables.emplace("t1", Table("t1", "cap", {"a", "b"}, {{"x", "1"}, {"y", "2"}}));
    c.instances.push_back({LogicType::count, "t1", "eq { count { all_rows } ; 2 }", "two rows"});
    Corpus back = corpus_from_json(corpus_to_json(c));
    EXPECT_EQ(back.instances, c.instances);
    EXPECT_EQ(back.tables.at("t1"), c.tables.at("t1"));
    EXPECT_EQ(corpus_to_json(back), corpus_to_json(c));
    EXPECT_THROW(c.table("nope"), InputError);
}

TEST(FewShot, QuotasAreProportionalLargestRemainder) {
    Corpus c;
    c.tables.emplace("t", Table("t", "", {"a"}, {{"1"}}));
    auto add = [&](LogicType t, int n) {
        for (int i = 0; i < n; ++i) c.instances.push_back({t, "t", "eq { count { all_rows } ; 1 }", std::to_string(i)});
    };
    add(LogicType::count, 5);
    add(LogicType::superlative, 3);
    add(LogicType::unique, 2);
    auto q = stratified_quotas(c, 5);
    EXPECT_EQ(q[LogicType::count], 3u);  // 2.5 -> 2 + remainder tie to the earlier type
    EXPECT_EQ(q[LogicType::superlative], 1u);
    EXPECT_EQ(q[LogicType::unique], 1u);
    std::size_t total = 0;
    for (auto [t, n] : q) total += n;
    EXPECT_EQ(total, 5u);
    EXPECT_THROW(stratified_quotas(c, 11), InputError);

    Corpus s = stratified_sample(c, 5, 9);
    EXPECT_EQ(s.instances.size(), 5u);
    EXPECT_EQ(s.tables.size(), 1u);
    EXPECT_EQ(corpus_to_json(stratified_sample(c, 5, 9)), corpus_to_json(s));
    std::map<LogicType, std::size_t> got;
    for (const auto& i : s.instances) ++got[i.logic_type];
    for (auto [t, n] : q) EXPECT_EQ(got[t], n);
}
