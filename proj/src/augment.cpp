#include "logicloom/augment.hpp"

#include <algorithm>
#include <fstream>
#include <regex>

#include "logicloom/lf.hpp"
#include "logicloom/metrics.hpp"

namespace logicloom {

std::string_view to_string(ItemKind kind) { return kind == ItemKind::lf ? "lf" : "text"; }

ItemKind item_kind_from_string(std::string_view name) {
    if (name == "lf") return ItemKind::lf;
    if (name == "text") return ItemKind::text;
    throw InputError("unknown item kind '" + std::string(name) + "' (lf | text)");
}

nlohmann::json item_to_json(const UnpairedItem& item) {
    return {{"schema_version", 1},
            {"logic_type", std::string(to_string(item.logic_type))},
            {"table_id", item.table_id},
            {"kind", std::string(to_string(item.kind))},
            {"value", item.value}};
}

UnpairedItem item_from_json(const nlohmann::json& j) {
    try {
        UnpairedItem item;
        item.kind = item_kind_from_string(j.at("kind").get<std::string>());
        item.logic_type = logic_type_from_string(j.at("logic_type").get<std::string>());
        item.table_id = j.at("table_id").get<std::string>();
        item.value = j.at("value").get<std::string>();
        return item;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("bad augmented item: ") + e.what());
    }
}

AugmentStats::AugmentStats() {
    for (auto t : kLogicTypes) per_topic_kept[t] = 0;
}

nlohmann::json AugmentStats::to_json() const {
    nlohmann::json per = nlohmann::json::object();
    for (auto t : kLogicTypes) per[std::string(to_string(t))] = per_topic_kept.at(t);
    return {{"schema_version", 1},
            {"generated", generated},
            {"kept", kept},
            {"dropped_length", dropped_length},
            {"dropped_duplicate", dropped_duplicate},
            {"duplicate_of_training", duplicate_of_training},
            {"duplicate_within", duplicate_within},
            {"generation_calls", generation_calls},
            {"per_topic_kept", per}};
}

AugmentStats AugmentStats::from_json(const nlohmann::json& j) {
    try {
        AugmentStats s;
        s.generated = j.at("generated").get<std::size_t>();
        s.kept = j.at("kept").get<std::size_t>();
        s.dropped_length = j.at("dropped_length").get<std::size_t>();
        s.dropped_duplicate = j.at("dropped_duplicate").get<std::size_t>();
        s.duplicate_of_training = j.value("duplicate_of_training", std::size_t{0});
        s.duplicate_within = j.value("duplicate_within", std::size_t{0});
        s.generation_calls = j.value("generation_calls", std::size_t{0});
        for (const auto& [k, v] : j.at("per_topic_kept").items()) s.per_topic_kept[logic_type_from_string(k)] = v.get<std::size_t>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("bad augment stats: ") + e.what());
    }
}

std::string dedup_key(std::string_view value, ItemKind kind) {
    return kind == ItemKind::lf ? canonical_lf(value) : trim(value);
}

std::unordered_set<std::string> training_keys(const Corpus& corpus, ItemKind kind) {
    std::unordered_set<std::string> out;
    for (const auto& inst : corpus.instances) out.insert(dedup_key(kind == ItemKind::lf ? inst.lf : inst.text, kind));
    return out;
}

FilterVerdict filter_item(std::string_view candidate, ItemKind kind, const std::unordered_set<std::string>& training,
                          const Tokenizer& tokenizer, std::size_t max_tokens) {
    auto n = tokenizer.tokenize(candidate).size();
    if (n == 0 || n > max_tokens) return FilterVerdict::drop_length;
    if (training.count(dedup_key(candidate, kind))) return FilterVerdict::drop_duplicate;
    return FilterVerdict::keep;
}

AugmentResult topicda(const std::map<std::string, Table>& tables, GenerativeModel& model, Role role,
                      const Corpus& training, const Tokenizer& tokenizer, int beam_size, const FilterOptions& options) {
    if (role != Role::d2l && role != Role::d2t) throw InputError("topicda needs a D2L or D2T model");
    if (beam_size < 1) throw InputError("beam size must be at least 1");
    ItemKind kind = role == Role::d2l ? ItemKind::lf : ItemKind::text;
    auto train_keys = training_keys(training, kind);
    std::unordered_set<std::string> seen;
    AugmentResult result;
    auto& stats = result.stats;
    for (const auto& [id, table] : tables) {
        for (auto topic : kLogicTypes) {
            std::vector<Tokens> input = {serialize_input(role, topic, table, std::nullopt, tokenizer).tokens};
            std::vector<Tokens> out;
            try {
                out = model.generate(input, beam_size);
                ++stats.generation_calls;
            } catch (const Error& e) {
                throw AugmentError("topicda stopped at table '" + id + "', topic " + std::string(to_string(topic)) +
                                       ": " + e.what(),
                                   result);
            }
            ++stats.generated;
            std::string candidate = out.empty() ? std::string{} : trim(to_wire(out.front()));
            switch (filter_item(candidate, kind, train_keys, tokenizer, options.max_tokens)) {
                case FilterVerdict::drop_length: ++stats.dropped_length; continue;
                case FilterVerdict::drop_duplicate:
                    ++stats.dropped_duplicate;
                    ++stats.duplicate_of_training;
                    continue;
                case FilterVerdict::keep: break;
            }
            std::string key = dedup_key(candidate, kind);
            if (options.dedup_within && !seen.insert(key).second) {
                ++stats.dropped_duplicate;
                ++stats.duplicate_within;
                continue;
            }
            ++stats.kept;
            ++stats.per_topic_kept[topic];
            result.items.push_back({kind, topic, id, kind == ItemKind::lf ? key : candidate});
        }
    }
    return result;
}

namespace {

bool is_ordinal_token(const std::string& t) {
    static const std::regex numeric(R"(\d+(st|nd|rd|th))");
    static const std::unordered_set<std::string> words = {"second", "third", "fourth",  "fifth",
                                                           "sixth",  "seventh", "eighth", "ninth", "tenth"};
    return words.count(t) || std::regex_match(t, numeric);
}

}  // namespace

LogicType classify_text_topic(std::string_view text) {
    Tokens toks = MetricTokenizer{}.tokenize(text);
    auto has = [&](std::initializer_list<std::string_view> words) {
        return std::any_of(toks.begin(), toks.end(), [&](const std::string& t) {
            return std::find(words.begin(), words.end(), t) != words.end();
        });
    };
    auto has_pair = [&](std::string_view a, std::initializer_list<std::string_view> b) {
        for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
            if (toks[i] == a && std::find(b.begin(), b.end(), toks[i + 1]) != b.end()) return true;
        }
        return false;
    };
    if (has_pair("most", {"of"}) || has_pair("all", {"of", "the"}) || has({"majority", "every", "each"})) {
        return LogicType::majority;
    }
    if (std::any_of(toks.begin(), toks.end(), is_ordinal_token)) return LogicType::ordinal;
    if (has({"only", "unique", "sole"})) return LogicType::unique;
    if (has({"average", "total", "sum", "combined", "mean", "totals", "altogether"})) return LogicType::aggregation;
    if (has({"highest", "lowest", "largest", "smallest", "biggest", "best", "worst", "greatest", "earliest", "latest",
             "longest", "shortest", "oldest", "youngest", "fewest", "maximum", "minimum", "top"}) ||
        has_pair("the", {"most", "least"})) {
        return LogicType::superlative;
    }
    if (has({"than", "higher", "lower", "more", "fewer", "less", "greater", "larger", "smaller", "bigger", "earlier",
             "later", "longer", "shorter", "older", "younger", "difference", "outnumber", "exceeds"})) {
        return LogicType::comparative;
    }
    return LogicType::count;
}

nlohmann::json QualityReport::to_json() const {
    nlohmann::json j = {{"schema_version", 1},
                        {"lf_count", lf_count},
                        {"text_count", text_count},
                        {"lf_parseable", lf_parseable},
                        {"lf_executable", lf_executable},
                        {"lf_true", lf_true},
                        {"lf_topic_consistency", lf_topic_consistency},
                        {"text_topic_consistency", text_topic_consistency}};
    j["text_true"] = text_true ? nlohmann::json(*text_true) : nlohmann::json(nullptr);
    if (text_error) j["text_error"] = *text_error;
    return j;
}

QualityReport quality_report(std::span<const UnpairedItem> lfs, std::span<const UnpairedItem> texts,
                             const std::map<std::string, Table>& tables, GenerativeModel* lg, int beam_size) {
    auto table_of = [&](const UnpairedItem& item) -> const Table& {
        auto it = tables.find(item.table_id);
        if (it == tables.end()) throw InputError("augmented item refers to unknown table '" + item.table_id + "'");
        return it->second;
    };
    auto frac = [](std::size_t k, std::size_t n) { return n ? static_cast<double>(k) / static_cast<double>(n) : 0.0; };

    QualityReport r;
    r.lf_count = lfs.size();
    r.text_count = texts.size();
    std::size_t parseable = 0, executable = 0, truthful = 0, consistent = 0;
    for (const auto& item : lfs) {
        const Table& table = table_of(item);
        try {
            LfNode ast = parse_lf(item.value);
            ++parseable;
            if (classify_lf_topic(ast) == item.logic_type) ++consistent;
        } catch (const ParseError&) {
            continue;
        }
        if (executes_ok(item.value, table, ExecMode::error_free)) ++executable;
        if (executes_ok(item.value, table, ExecMode::truthy)) ++truthful;
    }
    r.lf_parseable = frac(parseable, lfs.size());
    r.lf_executable = frac(executable, lfs.size());
    r.lf_true = frac(truthful, lfs.size());
    r.lf_topic_consistency = frac(consistent, lfs.size());

    std::size_t text_consistent = 0;
    for (const auto& item : texts) {
        table_of(item);
        if (classify_text_topic(item.value) == item.logic_type) ++text_consistent;
    }
    r.text_topic_consistency = frac(text_consistent, texts.size());

    if (lg) {
        try {
            std::vector<Tokens> inputs;
            for (const auto& item : texts) {
                inputs.push_back(serialize_input(Role::lg, item.logic_type, table_of(item), item.value).tokens);
            }
            auto outs = texts.empty() ? std::vector<Tokens>{} : lg->generate(inputs, beam_size);
            if (outs.size() != texts.size()) throw ModelError("back-translation returned the wrong number of outputs");
            std::size_t ok = 0;
            for (std::size_t i = 0; i < texts.size(); ++i) {
                if (executes_ok(to_wire(outs[i]), table_of(texts[i]), ExecMode::truthy)) ++ok;
            }
            r.text_true = frac(ok, texts.size());
        } catch (const ModelError& e) {
            r.text_error = e.what();
        }
    }
    return r;
}

void write_items_jsonl(const std::filesystem::path& path, std::span<const UnpairedItem> items) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path.string());
    for (const auto& item : items) os << item_to_json(item).dump() << "\n";
}

std::vector<UnpairedItem> read_items_jsonl(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot read " + path.string());
    std::vector<UnpairedItem> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            out.push_back(item_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error& e) {
            throw InputError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace logicloom
