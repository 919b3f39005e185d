#include "logicloom/pipeline.hpp"

#include <cstdlib>
#include <fstream>

#include "logicloom/error.hpp"
#include "logicloom/weighting.hpp"

namespace logicloom {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot read " + path.string());
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw InputError("cannot write " + tmp.string());
        os << j.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw InputError("pipeline config must be a JSON object");
    PipelineConfig c;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "_notes") continue;
            if (key == "run_dir") {
                c.run_dir = resolve(base_dir, v.get<std::string>());
            } else if (key == "dataset") {
                std::string format = v.value("format", "corpus");
                if (format == "corpus") c.dataset_format = DatasetFormat::corpus;
                else if (format == "logic2text") c.dataset_format = DatasetFormat::logic2text;
                else throw InputError("dataset.format must be corpus or logic2text");
                c.train_path = resolve(base_dir, v.at("train").get<std::string>());
                c.validation_path = resolve(base_dir, v.at("validation").get<std::string>());
                c.test_path = resolve(base_dir, v.at("test").get<std::string>());
                if (v.contains("field_map")) c.field_map = FieldMap::from_json(v["field_map"]);
            } else if (key == "tables") {
                c.tables_path = resolve(base_dir, v.at("path").get<std::string>());
                std::string format = v.value("format", "json");
                if (format == "json") c.tables_format = TableFormat::json;
                else if (format == "csv_dir") c.tables_format = TableFormat::csv_dir;
                else throw InputError("tables.format must be json or csv_dir");
            } else if (key == "few_shot") {
                c.few_shot = v.at("instances").get<std::size_t>();
                c.few_shot_seed = v.value("seed", std::uint64_t{1});
            } else if (key == "models") {
                for (const auto& [role, spec] : v.items()) {
                    std::string s = spec.get<std::string>();
                    if (role == "l2t") c.models.l2t = s;
                    else if (role == "lg") c.models.lg = s;
                    else if (role == "l2t_teacher") c.models.l2t_teacher = s;
                    else if (role == "lg_teacher") c.models.lg_teacher = s;
                    else if (role == "d2l") c.models.d2l = s;
                    else if (role == "d2t") c.models.d2t = s;
                    else if (role != "_notes") throw InputError("unknown model role '" + role + "'");
                }
            } else if (key == "model_timeout_ms") {
                c.model_timeout = std::chrono::milliseconds(v.get<long long>());
            } else if (key == "da_train_epochs") {
                c.da_train_epochs = v.get<int>();
            } else if (key == "tokenizer") {
                c.tokenizer = v.get<std::string>();
            } else if (key == "filter") {
                c.filter.max_tokens = v.value("max_tokens", c.filter.max_tokens);
                c.filter.dedup_within = v.value("dedup_within", c.filter.dedup_within);
            } else if (key == "exec_mode") {
                c.exec_mode = exec_mode_from_string(v.get<std::string>());
            } else if (key == "train") {
                c.train = TrainConfig::from_json(v);
            } else {
                throw InputError("unknown config key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("bad pipeline config: ") + e.what());
    }
    if (!j.contains("dataset")) throw InputError("pipeline config needs a dataset section");
    if (const char* env = std::getenv("LOGICLOOM_RUN_DIR"); env && *env) c.run_dir = env;
    if (c.run_dir.empty()) c.run_dir = base_dir / "runs" / "default";
    return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    return from_json(read_json(path), base);
}

nlohmann::json PipelineConfig::to_json() const {
    nlohmann::json j;
    j["run_dir"] = run_dir.string();
    j["dataset"] = {{"format", dataset_format == DatasetFormat::corpus ? "corpus" : "logic2text"},
                    {"train", train_path.string()},
                    {"validation", validation_path.string()},
                    {"test", test_path.string()},
                    {"field_map", field_map.to_json()}};
    if (tables_path) j["tables"] = {{"path", tables_path->string()}, {"format", tables_format == TableFormat::json ? "json" : "csv_dir"}};
    if (few_shot) j["few_shot"] = {{"instances", *few_shot}, {"seed", few_shot_seed}};
    j["models"] = {{"l2t", models.l2t}, {"lg", models.lg}, {"l2t_teacher", models.l2t_teacher},
                   {"lg_teacher", models.lg_teacher}, {"d2l", models.d2l}, {"d2t", models.d2t}};
    j["model_timeout_ms"] = model_timeout.count();
    j["da_train_epochs"] = da_train_epochs;
    j["tokenizer"] = tokenizer;
    j["filter"] = {{"max_tokens", filter.max_tokens}, {"dedup_within", filter.dedup_within}};
    j["exec_mode"] = std::string(to_string(exec_mode));
    j["train"] = train.to_json();
    return j;
}

void PipelineConfig::validate() const {
    for (const auto& p : {train_path, validation_path, test_path}) {
        if (!std::filesystem::exists(p)) throw InputError("dataset file not found: " + p.string());
    }
    if (tables_path && !std::filesystem::exists(*tables_path)) throw InputError("tables not found: " + tables_path->string());
    if (da_train_epochs < 0) throw InputError("da_train_epochs must be non-negative");
    if (model_timeout.count() <= 0) throw InputError("model_timeout_ms must be positive");
    make_tokenizer(tokenizer);
    train.validate();
    for (const auto* spec : {&models.l2t, &models.lg, &models.d2l, &models.d2t}) {
        if (spec->empty()) throw InputError("empty model descriptor");
    }
}

namespace {

Corpus load_split(const PipelineConfig& c, const std::filesystem::path& path) {
    if (c.dataset_format == PipelineConfig::DatasetFormat::logic2text) return load_dataset(path, c.field_map);
    return corpus_from_json(read_json(path));
}

// Runs `body`, converting failures into StageError tagged with `stage`.
template <typename F>
auto stage_guard(const std::string& stage, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const InputError& e) {
        throw StageError(stage, e.what(), true);
    } catch (const Error& e) {
        throw StageError(stage, e.what(), false);
    } catch (const std::filesystem::filesystem_error& e) {
        throw StageError(stage, e.what(), true);
    }
}

void train_da_model(GenerativeModel& model, Role role, const Corpus& corpus, int epochs, std::size_t batch) {
    std::vector<WeightedPair> pairs;
    for (const auto& inst : corpus.instances) {
        const std::string& target = role == Role::d2l ? inst.lf : inst.text;
        pairs.push_back({serialize_input(role, inst.logic_type, corpus.table(inst.table_id)).tokens, from_wire(target), 1.0});
    }
    for (int e = 0; e < epochs; ++e) {
        for (std::size_t start = 0; start < pairs.size(); start += batch) {
            std::size_t end = std::min(pairs.size(), start + batch);
            model.train_weighted(std::span<const WeightedPair>(pairs.data() + start, end - start));
        }
    }
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, const std::function<void(const std::string&)>& log_fn) {
    auto log = [&](const std::string& msg) {
        if (log_fn) log_fn(msg);
    };
    PipelineResult result;
    const auto& root = config.run_dir;

    Corpus train, validation, test;
    std::map<std::string, Table> pool;
    stage_guard("load", [&] {
        config.validate();
        train = load_split(config, config.train_path);
        validation = load_split(config, config.validation_path);
        test = load_split(config, config.test_path);
        log("load: " + std::to_string(train.instances.size()) + " train / " + std::to_string(validation.instances.size()) +
            " validation / " + std::to_string(test.instances.size()) + " test instances over " +
            std::to_string(train.tables.size()) + " train tables");
        if (config.few_shot) {
            train = stratified_sample(train, *config.few_shot, config.few_shot_seed);
            log("load: few-shot subset of " + std::to_string(train.instances.size()) + " instances");
        }
        pool = train.tables;
        if (config.tables_path) {
            Corpus extra = load_tables(*config.tables_path, config.tables_format);
            for (auto& [id, t] : extra.tables) pool.emplace(id, std::move(t));
        }
        std::filesystem::create_directories(root);
        write_json(root / "pipeline.json", {{"schema_version", 1}, {"config", config.to_json()}});
        write_json(root / "data" / "train.json", corpus_to_json(train));
        nlohmann::json tables = nlohmann::json::array();
        for (const auto& [id, t] : pool) tables.push_back(table_to_json(t));
        write_json(root / "data" / "tables.json", {{"schema_version", 1}, {"tables", tables}});
    });
    auto tokenizer = make_tokenizer(config.tokenizer);

    // Augment.
    std::vector<UnpairedItem> lfs, texts;
    auto aug_dir = root / "augment";
    stage_guard("augment", [&] {
        if (std::filesystem::exists(aug_dir / "stats.json")) {
            lfs = read_items_jsonl(aug_dir / "lfs.jsonl");
            texts = read_items_jsonl(aug_dir / "texts.jsonl");
            log("augment: resumed (" + std::to_string(lfs.size()) + " LFs, " + std::to_string(texts.size()) + " texts)");
            result.resumed_stages.push_back("augment");
            return;
        }
        auto d2l = make_model(config.models.d2l, config.model_timeout);
        auto d2t = make_model(config.models.d2t, config.model_timeout);
        train_da_model(*d2l, Role::d2l, train, config.da_train_epochs, config.train.batch_size);
        train_da_model(*d2t, Role::d2t, train, config.da_train_epochs, config.train.batch_size);
        auto lf_res = topicda(pool, *d2l, Role::d2l, train, *tokenizer, config.train.beam_size, config.filter);
        auto text_res = topicda(pool, *d2t, Role::d2t, train, *tokenizer, config.train.beam_size, config.filter);
        lfs = std::move(lf_res.items);
        texts = std::move(text_res.items);
        write_items_jsonl(aug_dir / "lfs.jsonl", lfs);
        write_items_jsonl(aug_dir / "texts.jsonl", texts);
        write_json(aug_dir / "stats.json",
                   {{"schema_version", 1}, {"lf", lf_res.stats.to_json()}, {"text", text_res.stats.to_json()}});
        log("augment: kept " + std::to_string(lfs.size()) + " of " + std::to_string(lf_res.stats.generated) +
            " LFs and " + std::to_string(texts.size()) + " of " + std::to_string(text_res.stats.generated) + " texts");
    });

    // Weigh and train.
    auto l2t = stage_guard("models", [&] { return make_model(config.models.l2t, config.model_timeout); });
    auto lg = stage_guard("models", [&] { return make_model(config.models.lg, config.model_timeout); });
    auto train_dir = root / "train";
    auto weights_dir = root / "weights";
    bool trained = false;
    stage_guard("train", [&] {
        auto manifest_path = train_dir / "manifest.json";
        if (!std::filesystem::exists(manifest_path)) return;
        auto manifest = read_json(manifest_path);
        if (manifest.value("status", "") != "complete") return;
        const auto& best = manifest.at("best");
        if (best.contains("l2t_checkpoint")) l2t->load(train_dir / best["l2t_checkpoint"].get<std::string>());
        if (best.contains("lg_checkpoint")) lg->load(train_dir / best["lg_checkpoint"].get<std::string>());
        if (!best.contains("l2t_checkpoint") || !best.contains("lg_checkpoint")) return;
        trained = true;
        log("train: resumed from " + manifest_path.string());
        result.resumed_stages.push_back("train");
    });
    if (!trained) {
        auto l2t_teacher = stage_guard("models", [&] {
            return make_model(config.models.l2t_teacher.empty() ? config.models.l2t : config.models.l2t_teacher,
                              config.model_timeout);
        });
        auto lg_teacher = stage_guard("models", [&] {
            return make_model(config.models.lg_teacher.empty() ? config.models.lg : config.models.lg_teacher,
                              config.model_timeout);
        });
        JointModels models{*l2t, *lg, *l2t_teacher, *lg_teacher};
        RunOptions opts;
        opts.run_dir = train_dir;
        opts.exec_mode = config.exec_mode;
        opts.log = log;
        HashedTrigramEmbedder embedder;
        opts.weights = [&](JointModels& m) {
            return stage_guard("weigh", [&] {
                if (std::filesystem::exists(weights_dir / "stats.json")) {
                    log("weigh: resumed");
                    result.resumed_stages.push_back("weigh");
                    return std::make_pair(read_weighted_jsonl(weights_dir / "lfs.jsonl"),
                                          read_weighted_jsonl(weights_dir / "texts.jsonl"));
                }
                WeightingOptions wopt;
                wopt.beam_size = config.train.beam_size;
                std::vector<std::string> warnings;
                auto wl = weight_lfs(lfs, pool, m.l2t_teacher, m.lg_teacher, embedder, wopt, &warnings);
                auto wt = weight_texts(texts, pool, m.l2t_teacher, m.lg_teacher, embedder, wopt, &warnings);
                for (const auto& w : warnings) log("weigh: warning: " + w);
                write_weighted_jsonl(weights_dir / "lfs.jsonl", wl);
                write_weighted_jsonl(weights_dir / "texts.jsonl", wt);
                nlohmann::json stats = {{"schema_version", 1}, {"warnings", warnings.size()}};
                for (auto [name, set] : {std::pair{"lf", &wl}, std::pair{"text", &wt}}) {
                    if (set->empty()) {
                        stats[name] = {{"count", 0}};
                        continue;
                    }
                    auto [mean, sd] = weight_stats(std::span<const WeightedItem>(*set));
                    stats[name] = {{"count", set->size()}, {"mean", mean}, {"std", sd}};
                }
                write_json(weights_dir / "stats.json", stats);
                log("weigh: weighted " + std::to_string(wl.size()) + " LFs and " + std::to_string(wt.size()) + " texts");
                return std::make_pair(std::move(wl), std::move(wt));
            });
        };
        stage_guard("train", [&] {
            run(config.train, train, validation, pool, lfs, texts, models, opts);
        });
    }

    // Evaluate.
    auto eval_dir = root / "eval";
    stage_guard("evaluate", [&] {
        if (std::filesystem::exists(eval_dir / "test_eval.json")) {
            result.test_eval = EvalBundle::from_json(read_json(eval_dir / "test_eval.json").at("eval"));
            log("evaluate: resumed");
            result.resumed_stages.push_back("evaluate");
            return;
        }
        result.test_eval = evaluate(*l2t, *lg, test, config.train.beam_size, config.exec_mode);
        auto quality = quality_report(lfs, texts, pool, lg.get(), config.train.beam_size);
        write_json(eval_dir / "quality_report.json", quality.to_json());
        write_json(eval_dir / "test_eval.json", {{"schema_version", 1}, {"eval", result.test_eval.to_json()}});
        log("evaluate: bleu4 " + std::to_string(result.test_eval.bleu4) + ", lf_acc " +
            std::to_string(result.test_eval.lf_acc) + ", exec_acc " + std::to_string(result.test_eval.exec_acc));
    });
    return result;
}

}  // namespace logicloom
