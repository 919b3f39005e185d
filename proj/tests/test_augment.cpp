#include <gtest/gtest.h>

#include <random>

#include "logicloom/augment.hpp"
#include "logicloom/lf.hpp"
#include "logicloom/synthetic.hpp"
#include "support/fixtures.hpp"
#include "support/spy_model.hpp"

using namespace logicloom;
using logicloom::testing::SpyModel;

namespace {

std::map<std::string, Table> two_tables() {
    std::map<std::string, Table> m;
    m.emplace("b", Table("b", "cup b", {"player", "goals"}, {{"anna", "3"}, {"bruno", "5"}}));
    m.emplace("a", Table("a", "cup a", {"player", "goals"}, {{"carla", "2"}, {"dmitri", "2"}}));
    return m;
}

Corpus training_with(const std::string& lf, const std::string& text) {
    Corpus c;
    c.tables.emplace("a", Table("a", "cup a", {"player", "goals"}, {{"carla", "2"}, {"dmitri", "2"}}));
    c.instances.push_back({LogicType::count, "a", lf, text});
    return c;
}

// Scripted outputs keyed by (table caption, topic) read back from the serialized input.
std::function<Tokens(const Tokens&)> scripted(std::map<std::pair<std::string, std::string>, std::string> script) {
    return [script](const Tokens& in) {
        std::string topic = in.at(1);
        std::string caption = in.at(3) + " " + in.at(4);
        auto it = script.find({caption, topic});
        return it == script.end() ? Tokens{} : from_wire(it->second);
    };
}

}  // namespace

TEST(TopicDA, OneCallPerTableAndTopicInFixedOrder) {
    SpyModel d2l("d2l");
    WhitespaceTokenizer tk;
    auto result = topicda(two_tables(), d2l, Role::d2l, Corpus{}, tk, 3);
    EXPECT_EQ(d2l.generate_calls, 14u);
    EXPECT_EQ(result.stats.generation_calls, 14u);
    ASSERT_EQ(d2l.inputs_seen.size(), 14u);
    for (std::size_t i = 0; i < 14; ++i) {
        EXPECT_EQ(d2l.inputs_seen[i][1], to_string(kLogicTypes[i % 7]));
        EXPECT_EQ(d2l.inputs_seen[i][4], i < 7 ? "a" : "b");  // tables in id order
    }
    EXPECT_EQ(d2l.last_beam, 3);
    EXPECT_THROW(topicda(two_tables(), d2l, Role::l2t, Corpus{}, tk), InputError);
    EXPECT_THROW(topicda(two_tables(), d2l, Role::d2l, Corpus{}, tk, 0), InputError);
}

TEST(TopicDA, FilterAccountingAndDedup) {
    SpyModel d2l("d2l");
    std::string long_lf = "eq { count { all_rows } ; 1";
    for (int i = 0; i < 250; ++i) long_lf += " 1";
    long_lf += " }";
    d2l.responder = scripted({
        {{"cup a", "count"}, "eq{count{all_rows};2}"},                 // duplicate of training after canonicalizing
        {{"cup a", "superlative"}, "eq { hop { argmax { all_rows ; goals } ; player } ; carla }"},
        {{"cup a", "unique"}, "only { filter_eq { all_rows ; player ; carla } }"},
        {{"cup a", "ordinal"}, long_lf},                               // over the length budget
        {{"cup a", "aggregation"}, "round_eq { avg { all_rows ; goals } ; 2 }"},
        {{"cup b", "count"}, "eq { count { all_rows } ; 2 }"},         // duplicate of training
        {{"cup b", "superlative"}, "eq{hop{argmax{all_rows;goals};player};carla}"},  // duplicate within
        {{"cup b", "unique"}, "only { filter_eq { all_rows ; player ; anna } }"},
        {{"cup b", "majority"}, "most_greater { all_rows ; goals ; 2 }"},
    });
    WhitespaceTokenizer tk;
    auto train = training_with("eq { count { all_rows } ; 2 }", "there are 2 players");
    auto r = topicda(two_tables(), d2l, Role::d2l, train, tk, 3, FilterOptions{200, true});
    const auto& s = r.stats;
    EXPECT_EQ(s.generated, 14u);
    EXPECT_TRUE(s.balanced());
    EXPECT_EQ(s.dropped_length, 6u);  // five empty outputs plus one over-long
    EXPECT_EQ(s.duplicate_of_training, 2u);
    EXPECT_EQ(s.duplicate_within, 1u);
    EXPECT_EQ(s.dropped_duplicate, 3u);
    EXPECT_EQ(s.kept, 5u);
    ASSERT_EQ(r.items.size(), 5u);
    EXPECT_EQ(r.items[0].table_id, "a");
    EXPECT_EQ(r.items[0].logic_type, LogicType::superlative);
    EXPECT_EQ(r.items[0].kind, ItemKind::lf);
    EXPECT_EQ(r.items[3].value, "only { filter_eq { all_rows ; player ; anna } }");
    EXPECT_EQ(s.per_topic_kept.at(LogicType::unique), 2u);
    EXPECT_EQ(s.per_topic_kept.at(LogicType::count), 0u);
    EXPECT_EQ(AugmentStats::from_json(s.to_json()).to_json(), s.to_json());

    SpyModel again("d2l");
    again.responder = d2l.responder;
    auto no_within = topicda(two_tables(), again, Role::d2l, train, tk, 3, FilterOptions{200, false});
    EXPECT_EQ(no_within.stats.kept, 6u);
    EXPECT_EQ(no_within.stats.duplicate_within, 0u);
}

TEST(TopicDA, TextsDedupOnTrimmedText) {
    SpyModel d2t("d2t");
    d2t.responder = [](const Tokens& in) {
        if (in[1] == "count") return Tokens{"there", "are", "2", "players"};
        if (in[1] == "unique") return Tokens{"only", "anna", "scored", "3"};
        return Tokens{};
    };
    WhitespaceTokenizer tk;
    auto r = topicda(two_tables(), d2t, Role::d2t, training_with("eq { count { all_rows } ; 2 }", "there are 2 players"),
                     tk);
    EXPECT_EQ(r.stats.duplicate_of_training, 2u);
    EXPECT_EQ(r.stats.duplicate_within, 1u);
    ASSERT_EQ(r.items.size(), 1u);
    EXPECT_EQ(r.items[0].kind, ItemKind::text);
    EXPECT_EQ(r.items[0].value, "only anna scored 3");
}

TEST(TopicDA, ModelFailureCarriesPartialResult) {
    SpyModel d2l("d2l");
    d2l.responder = [](const Tokens&) { return from_wire("eq { count { all_rows } ; 2 }"); };
    d2l.fail_on = [](const Tokens& in) { return in[4] == "b" && in[1] == "unique"; };
    WhitespaceTokenizer tk;
    try {
        topicda(two_tables(), d2l, Role::d2l, Corpus{}, tk);
        FAIL();
    } catch (const AugmentError& e) {
        EXPECT_EQ(e.partial().stats.generated, 10u);
        EXPECT_EQ(e.partial().items.size(), 1u);
        EXPECT_TRUE(e.partial().stats.balanced());
    }
}

TEST(Filter, Verdicts) {
    WhitespaceTokenizer tk;
    std::unordered_set<std::string> train = {"eq { count { all_rows } ; 2 }"};
    EXPECT_EQ(filter_item("", ItemKind::lf, train, tk), FilterVerdict::drop_length);
    EXPECT_EQ(filter_item("a b c", ItemKind::text, train, tk, 2), FilterVerdict::drop_length);
    EXPECT_EQ(filter_item("a b", ItemKind::text, train, tk, 2), FilterVerdict::keep);
    EXPECT_EQ(filter_item("eq{count{all_rows};2}", ItemKind::lf, train, tk), FilterVerdict::drop_duplicate);
    EXPECT_EQ(dedup_key("  x y ", ItemKind::text), "x y");
    EXPECT_EQ(dedup_key("only{all_rows}", ItemKind::lf), "only { all_rows }");
    auto keys = training_keys(training_with("only{all_rows}", " one row "), ItemKind::lf);
    EXPECT_TRUE(keys.count("only { all_rows }"));
    EXPECT_TRUE(training_keys(training_with("only{all_rows}", " one row "), ItemKind::text).count("one row"));
}

TEST(TextTopic, KeywordPrecedence) {
    EXPECT_EQ(classify_text_topic("Most of the players scored at least 2 goals"), LogicType::majority);
    EXPECT_EQ(classify_text_topic("every driver finished"), LogicType::majority);
    EXPECT_EQ(classify_text_topic("the second highest score belongs to anna"), LogicType::ordinal);
    EXPECT_EQ(classify_text_topic("anna finished 3rd"), LogicType::ordinal);
    EXPECT_EQ(classify_text_topic("anna is the only player with 3 goals"), LogicType::unique);
    EXPECT_EQ(classify_text_topic("the average attendance was 400"), LogicType::aggregation);
    EXPECT_EQ(classify_text_topic("anna scored the highest number of goals"), LogicType::superlative);
    EXPECT_EQ(classify_text_topic("anna got the most votes"), LogicType::superlative);
    EXPECT_EQ(classify_text_topic("anna scored more goals than bruno"), LogicType::comparative);
    EXPECT_EQ(classify_text_topic("there are 3 players from oslo"), LogicType::count);
}

TEST(Quality, SampledLfsAreFullyValidAndTopicConsistent) {
    std::mt19937_64 rng(21);
    std::map<std::string, Table> tables;
    std::vector<UnpairedItem> lfs, texts;
    for (int i = 0; i < 15; ++i) {
        Table t = synthetic_table("q" + std::to_string(i), rng);
        for (auto topic : kLogicTypes) {
            try {
                LfNode lf = sample_lf(t, topic, rng(), 8);
                lfs.push_back({ItemKind::lf, topic, t.id(), print_lf(lf)});
                texts.push_back({ItemKind::text, topic, t.id(), realize_template(lf, t)});
            } catch (const SamplingExhausted&) {
            }
        }
        tables.emplace(t.id(), std::move(t));
    }
    // An LG stand-in that answers every text with its source LF.
    std::map<std::string, std::string> lf_of;
    for (std::size_t i = 0; i < texts.size(); ++i) lf_of[texts[i].value] = lfs[i].value;
    SpyModel lg("lg");
    lg.responder = [&](const Tokens& in) { return from_wire(lf_of.at(to_wire(logicloom::testing::payload_of(in)))); };

    auto r = quality_report(lfs, texts, tables, &lg);
    EXPECT_EQ(r.lf_count, lfs.size());
    EXPECT_DOUBLE_EQ(r.lf_parseable, 1.0);
    EXPECT_DOUBLE_EQ(r.lf_executable, 1.0);
    EXPECT_DOUBLE_EQ(r.lf_true, 1.0);
    EXPECT_DOUBLE_EQ(r.lf_topic_consistency, 1.0);
    ASSERT_TRUE(r.text_true);
    EXPECT_DOUBLE_EQ(*r.text_true, 1.0);
    EXPECT_GE(r.text_topic_consistency, 0.0);
    EXPECT_LE(r.text_topic_consistency, 1.0);

    auto no_lg = quality_report(lfs, texts, tables, nullptr);
    EXPECT_FALSE(no_lg.text_true);
    auto j = no_lg.to_json();
    EXPECT_TRUE(!j.contains("text_true") || j["text_true"].is_null());

    SpyModel broken("lg");
    broken.fail_on = [](const Tokens&) { return true; };
    auto failed = quality_report(lfs, texts, tables, &broken);
    EXPECT_FALSE(failed.text_true);
    EXPECT_TRUE(failed.text_error);
}

TEST(Quality, MixedBag) {
    auto tables = two_tables();
    std::vector<UnpairedItem> lfs = {
        {ItemKind::lf, LogicType::count, "b", "eq { count { all_rows } ; 2 }"},            // true
        {ItemKind::lf, LogicType::count, "b", "eq { count { all_rows } ; 3 }"},            // false
        {ItemKind::lf, LogicType::unique, "b", "hop { all_rows ; player }"},               // not Bool
        {ItemKind::lf, LogicType::count, "b", "eq { count { all_rows ; 3 }"},              // unparseable
    };
    auto r = quality_report(lfs, {}, tables, nullptr);
    EXPECT_DOUBLE_EQ(r.lf_parseable, 0.75);
    EXPECT_DOUBLE_EQ(r.lf_executable, 0.5);
    EXPECT_DOUBLE_EQ(r.lf_true, 0.25);
    EXPECT_DOUBLE_EQ(r.lf_topic_consistency, 0.5);
    std::vector<UnpairedItem> orphan = {{ItemKind::lf, LogicType::count, "zz", "only { all_rows }"}};
    EXPECT_THROW(quality_report(orphan, {}, tables, nullptr), InputError);
}

TEST(Items, JsonlRoundTrip) {
    auto path = std::filesystem::temp_directory_path() / ("logicloom-items-" + std::to_string(::getpid())) / "x.jsonl";
    std::vector<UnpairedItem> items = {{ItemKind::lf, LogicType::ordinal, "t1", "only { all_rows }"},
                                       {ItemKind::text, LogicType::count, "t2", "there are \"3\" rows"}};
    write_items_jsonl(path, items);
    EXPECT_EQ(read_items_jsonl(path), items);
    auto j = item_to_json(items[0]);
    EXPECT_EQ(j["schema_version"], 1);
    EXPECT_EQ(j["kind"], "lf");
    j["kind"] = "image";
    EXPECT_THROW(item_from_json(j), InputError);
    std::ofstream(path, std::ios::app) << "{not json\n";
    EXPECT_THROW(read_items_jsonl(path), InputError);
    std::filesystem::remove_all(path.parent_path());
}
