#include "logicloom/jointtrain.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <numeric>
#include <random>
#include <unistd.h>

#include "logicloom/error.hpp"

namespace logicloom {

void TrainConfig::validate() const {
    if (pretrain_epochs < 0 || joint_epochs < 0 || finetune_epochs_per_joint < 0) {
        throw InputError("epoch counts must be non-negative");
    }
    if (beam_size < 1) throw InputError("beam_size must be at least 1");
    if (batch_size < 1) throw InputError("batch_size must be at least 1");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"pretrain_epochs", pretrain_epochs},
            {"joint_epochs", joint_epochs},
            {"finetune_epochs_per_joint", finetune_epochs_per_joint},
            {"beam_size", beam_size},
            {"batch_size", batch_size},
            {"enable_bt", enable_bt},
            {"enable_st", enable_st},
            {"enable_curriculum", enable_curriculum},
            {"enable_weighting", enable_weighting},
            {"reweigh_each_epoch", reweigh_each_epoch},
            {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InputError("train config must be a JSON object");
    TrainConfig c;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "pretrain_epochs") c.pretrain_epochs = v.get<int>();
            else if (key == "joint_epochs") c.joint_epochs = v.get<int>();
            else if (key == "finetune_epochs_per_joint") c.finetune_epochs_per_joint = v.get<int>();
            else if (key == "beam_size") c.beam_size = v.get<int>();
            else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
            else if (key == "enable_bt") c.enable_bt = v.get<bool>();
            else if (key == "enable_st") c.enable_st = v.get<bool>();
            else if (key == "enable_curriculum") c.enable_curriculum = v.get<bool>();
            else if (key == "enable_weighting") c.enable_weighting = v.get<bool>();
            else if (key == "reweigh_each_epoch") c.reweigh_each_epoch = v.get<bool>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key != "_notes") throw InputError("unknown train config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("bad train config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json EpochReport::to_json() const {
    return {{"schema_version", 1},
            {"epoch", epoch},
            {"bt_pairs_l2t", bt_pairs_l2t},
            {"bt_pairs_lg", bt_pairs_lg},
            {"st_pairs_l2t", st_pairs_l2t},
            {"st_pairs_lg", st_pairs_lg},
            {"finetune_pairs", finetune_pairs},
            {"skipped", skipped},
            {"eval", eval.to_json()},
            {"best_l2t", best_l2t},
            {"best_lg", best_lg}};
}

EpochReport EpochReport::from_json(const nlohmann::json& j) {
    try {
        EpochReport r;
        r.epoch = j.at("epoch").get<int>();
        r.bt_pairs_l2t = j.at("bt_pairs_l2t").get<std::size_t>();
        r.bt_pairs_lg = j.at("bt_pairs_lg").get<std::size_t>();
        r.st_pairs_l2t = j.at("st_pairs_l2t").get<std::size_t>();
        r.st_pairs_lg = j.at("st_pairs_lg").get<std::size_t>();
        r.finetune_pairs = j.value("finetune_pairs", std::size_t{0});
        r.skipped = j.value("skipped", std::size_t{0});
        r.eval = EvalBundle::from_json(j.at("eval"));
        r.best_l2t = j.value("best_l2t", false);
        r.best_lg = j.value("best_lg", false);
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("bad epoch report: ") + e.what());
    }
}

std::vector<WeightedPair> supervised_pairs(const Corpus& corpus, Role role) {
    if (role != Role::l2t && role != Role::lg) throw InputError("supervised pairs exist only for L2T and LG");
    std::vector<WeightedPair> out;
    out.reserve(corpus.instances.size());
    for (const auto& inst : corpus.instances) {
        const Table& table = corpus.table(inst.table_id);
        const std::string& payload = role == Role::l2t ? inst.lf : inst.text;
        const std::string& target = role == Role::l2t ? inst.text : inst.lf;
        out.push_back({serialize_input(role, inst.logic_type, table, payload).tokens, from_wire(target), 1.0});
    }
    return out;
}

namespace {

void train_in_batches(GenerativeModel& model, const std::vector<WeightedPair>& pairs, std::size_t batch_size) {
    for (std::size_t start = 0; start < pairs.size(); start += batch_size) {
        std::size_t end = std::min(pairs.size(), start + batch_size);
        std::vector<WeightedPair> batch;
        for (std::size_t i = start; i < end; ++i) {
            if (!pairs[i].target.empty()) batch.push_back(pairs[i]);
        }
        if (!batch.empty()) model.train_weighted(batch);
    }
}

// Trains both models for `epochs` shuffled passes over the supervised pairs.
std::size_t supervised_passes(GenerativeModel& l2t, GenerativeModel& lg, const Corpus& corpus, int epochs,
                              std::size_t batch_size, std::mt19937_64& rng) {
    auto l2t_pairs = supervised_pairs(corpus, Role::l2t);
    auto lg_pairs = supervised_pairs(corpus, Role::lg);
    std::vector<std::size_t> order(corpus.instances.size());
    std::size_t delivered = 0;
    for (int e = 0; e < epochs; ++e) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<WeightedPair> a, b;
        a.reserve(order.size());
        b.reserve(order.size());
        for (auto i : order) {
            a.push_back(l2t_pairs[i]);
            b.push_back(lg_pairs[i]);
        }
        train_in_batches(l2t, a, batch_size);
        train_in_batches(lg, b, batch_size);
        delivered += order.size();
    }
    return delivered;
}

const Table& table_for(const std::map<std::string, Table>& tables, const std::string& id) {
    auto it = tables.find(id);
    if (it == tables.end()) throw InputError("augmented item refers to unknown table '" + id + "'");
    return it->second;
}

// Runs `teacher` over the items (payload = item value under `teacher_role`).
std::vector<std::optional<Tokens>> teacher_outputs(GenerativeModel& teacher, Role teacher_role,
                                                   std::span<const WeightedItem> items,
                                                   const std::map<std::string, Table>& tables, int beam_size,
                                                   std::vector<std::string>* warnings) {
    std::vector<Tokens> inputs;
    inputs.reserve(items.size());
    for (const auto& w : items) {
        inputs.push_back(
            serialize_input(teacher_role, w.item.logic_type, table_for(tables, w.item.table_id), w.item.value).tokens);
    }
    return generate_chunked(teacher, inputs, beam_size, 256, warnings, std::string(to_string(teacher_role)) + " teacher");
}

// Trains `student` (role `student_role`) on items whose real side is the
// target and whose pseudo side (from the teacher) is the source payload.
std::size_t back_translate(GenerativeModel& teacher, Role teacher_role, GenerativeModel& student, Role student_role,
                           std::span<const WeightedItem> items, const std::map<std::string, Table>& tables,
                           const TrainConfig& config, std::size_t& skipped, std::vector<std::string>* warnings) {
    auto pseudo = teacher_outputs(teacher, teacher_role, items, tables, config.beam_size, warnings);
    std::vector<WeightedPair> pairs;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& w = items[i];
        if (!pseudo[i]) {
            ++skipped;
            continue;
        }
        const Table& table = table_for(tables, w.item.table_id);
        pairs.push_back({serialize_input(student_role, w.item.logic_type, table, to_wire(*pseudo[i])).tokens,
                         from_wire(w.item.value), w.weight});
    }
    train_in_batches(student, pairs, config.batch_size);
    return pairs.size();
}

// Trains `student` on real sources and the same-direction teacher's outputs.
std::size_t self_train(GenerativeModel& teacher, GenerativeModel& student, Role role,
                       std::span<const WeightedItem> items, const std::map<std::string, Table>& tables,
                       const TrainConfig& config, std::size_t& skipped, std::vector<std::string>* warnings) {
    auto pseudo = teacher_outputs(teacher, role, items, tables, config.beam_size, warnings);
    std::vector<WeightedPair> pairs;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& w = items[i];
        if (!pseudo[i] || pseudo[i]->empty()) {
            ++skipped;
            continue;
        }
        const Table& table = table_for(tables, w.item.table_id);
        pairs.push_back({serialize_input(role, w.item.logic_type, table, w.item.value).tokens, *pseudo[i], w.weight});
    }
    train_in_batches(student, pairs, config.batch_size);
    return pairs.size();
}

}  // namespace

std::size_t pretrain(GenerativeModel& l2t, GenerativeModel& lg, const Corpus& supervised, int epochs,
                     std::size_t batch_size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return supervised_passes(l2t, lg, supervised, epochs, std::max<std::size_t>(1, batch_size), rng);
}

StepCounts bt_step(JointModels& models, std::span<const WeightedItem> lfs, std::span<const WeightedItem> texts,
                   const std::map<std::string, Table>& tables, const TrainConfig& config,
                   std::vector<std::string>* warnings) {
    StepCounts c;
    c.l2t_pairs = back_translate(models.lg_teacher, Role::lg, models.l2t, Role::l2t, texts, tables, config, c.skipped,
                                 warnings);
    c.lg_pairs = back_translate(models.l2t_teacher, Role::l2t, models.lg, Role::lg, lfs, tables, config, c.skipped,
                                warnings);
    return c;
}

StepCounts st_step(JointModels& models, std::span<const WeightedItem> lfs, std::span<const WeightedItem> texts,
                   const std::map<std::string, Table>& tables, const TrainConfig& config,
                   std::vector<std::string>* warnings) {
    StepCounts c;
    c.l2t_pairs = self_train(models.l2t_teacher, models.l2t, Role::l2t, lfs, tables, config, c.skipped, warnings);
    c.lg_pairs = self_train(models.lg_teacher, models.lg, Role::lg, texts, tables, config, c.skipped, warnings);
    return c;
}

EvalBundle evaluate(GenerativeModel& l2t, GenerativeModel& lg, const Corpus& test, int beam_size, ExecMode mode) {
    std::vector<Tokens> l2t_in, lg_in;
    std::vector<std::string> text_gold, lf_gold;
    std::vector<const Table*> tables;
    for (const auto& inst : test.instances) {
        const Table& table = test.table(inst.table_id);
        l2t_in.push_back(serialize_input(Role::l2t, inst.logic_type, table, inst.lf).tokens);
        lg_in.push_back(serialize_input(Role::lg, inst.logic_type, table, inst.text).tokens);
        text_gold.push_back(inst.text);
        lf_gold.push_back(inst.lf);
        tables.push_back(&table);
    }
    std::vector<std::string> text_pred, lf_pred;
    constexpr std::size_t kChunk = 256;
    for (std::size_t start = 0; start < l2t_in.size(); start += kChunk) {
        std::size_t n = std::min(kChunk, l2t_in.size() - start);
        auto texts = l2t.generate(std::span<const Tokens>(l2t_in.data() + start, n), beam_size);
        auto lfs = lg.generate(std::span<const Tokens>(lg_in.data() + start, n), beam_size);
        if (texts.size() != n || lfs.size() != n) throw ModelError("evaluation: model returned the wrong number of outputs");
        for (auto& t : texts) text_pred.push_back(to_wire(t));
        for (auto& l : lfs) lf_pred.push_back(to_wire(l));
    }
    MetricTokenizer tokenizer;
    return evaluate_all(text_pred, text_gold, lf_pred, lf_gold, tables, tokenizer, mode);
}

namespace {

class ScratchDir {
public:
    explicit ScratchDir(const std::filesystem::path& run_dir) {
        static std::atomic<unsigned> counter{0};
        if (run_dir.empty()) {
            path_ = std::filesystem::temp_directory_path() /
                    ("logicloom-run-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
            temporary_ = true;
        } else {
            path_ = run_dir;
        }
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        if (temporary_) {
            std::error_code ec;
            std::filesystem::remove_all(path_, ec);
        }
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    bool temporary_ = false;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
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

RunResult run(const TrainConfig& config, const Corpus& supervised, const Corpus& validation,
              const std::map<std::string, Table>& tables, std::span<const UnpairedItem> lfs,
              std::span<const UnpairedItem> texts, JointModels& models, const RunOptions& options) {
    config.validate();
    RunResult result;
    auto log = [&](const std::string& msg) {
        if (options.log) options.log(msg);
    };
    ScratchDir dir(options.run_dir);
    const auto& root = dir.path();
    std::filesystem::path run_log = root / "run_log.jsonl";
    std::filesystem::path manifest_path = root / "manifest.json";
    std::filesystem::path sync_dir = root / "sync";
    {
        std::ofstream truncate_log(run_log, std::ios::trunc);
    }

    nlohmann::json manifest = {{"schema_version", 1},
                               {"status", "running"},
                               {"config", config.to_json()},
                               {"seed", config.seed},
                               {"epochs", nlohmann::json::array()}};

    std::string stage = "pretrain";
    try {
        std::size_t n = pretrain(models.l2t, models.lg, supervised, config.pretrain_epochs, config.batch_size, config.seed);
        log("pretrain: " + std::to_string(n) + " pairs per model");
        stage = "sync";
        sync_teacher(models.l2t, models.l2t_teacher, sync_dir);
        sync_teacher(models.lg, models.lg_teacher, sync_dir);

        stage = "weighting";
        HashedTrigramEmbedder default_embedder;
        const Embedder& embedder = options.embedder ? *options.embedder : default_embedder;
        bool needs_items = config.enable_bt || config.enable_st;
        auto compute_weights = [&](bool allow_provider) {
            if (!needs_items) {
                result.weighted_lfs.clear();
                result.weighted_texts.clear();
                return;
            }
            if (!config.enable_weighting) {
                result.weighted_lfs = unit_weights(lfs);
                result.weighted_texts = unit_weights(texts);
            } else if (allow_provider && options.weights) {
                std::tie(result.weighted_lfs, result.weighted_texts) = options.weights(models);
            } else {
                WeightingOptions wopt;
                wopt.beam_size = config.beam_size;
                result.weighted_lfs = weight_lfs(lfs, tables, models.l2t_teacher, models.lg_teacher, embedder, wopt,
                                                 &result.warnings);
                result.weighted_texts = weight_texts(texts, tables, models.l2t_teacher, models.lg_teacher, embedder,
                                                     wopt, &result.warnings);
            }
            if (config.enable_curriculum) {
                result.weighted_lfs = curriculum_sort(std::move(result.weighted_lfs));
                result.weighted_texts = curriculum_sort(std::move(result.weighted_texts));
            }
        };
        compute_weights(true);
        log("weights: " + std::to_string(result.weighted_lfs.size()) + " LFs, " +
            std::to_string(result.weighted_texts.size()) + " texts");

        std::mt19937_64 finetune_rng(config.seed ^ 0x9e3779b97f4a7c15ull);
        double best_bleu = -1;
        double best_lf = -1;
        for (int epoch = 1; epoch <= config.joint_epochs; ++epoch) {
            EpochReport report;
            report.epoch = epoch;
            if (epoch > 1 && config.reweigh_each_epoch && config.enable_weighting) {
                stage = "weighting";
                compute_weights(false);
            }
            if (config.enable_bt) {
                stage = "back-translation";
                auto c = bt_step(models, result.weighted_lfs, result.weighted_texts, tables, config, &result.warnings);
                report.bt_pairs_l2t = c.l2t_pairs;
                report.bt_pairs_lg = c.lg_pairs;
                report.skipped += c.skipped;
            }
            if (config.enable_st) {
                stage = "self-training";
                auto c = st_step(models, result.weighted_lfs, result.weighted_texts, tables, config, &result.warnings);
                report.st_pairs_l2t = c.l2t_pairs;
                report.st_pairs_lg = c.lg_pairs;
                report.skipped += c.skipped;
            }
            stage = "fine-tune";
            report.finetune_pairs = supervised_passes(models.l2t, models.lg, supervised, config.finetune_epochs_per_joint,
                                                      config.batch_size, finetune_rng);
            stage = "sync";
            sync_teacher(models.l2t, models.l2t_teacher, sync_dir);
            sync_teacher(models.lg, models.lg_teacher, sync_dir);

            stage = "evaluate";
            report.eval = evaluate(models.l2t, models.lg, validation, config.beam_size, options.exec_mode);

            stage = "checkpoint";
            auto ckpt = root / "checkpoints" / ("epoch-" + std::to_string(epoch));
            std::filesystem::create_directories(ckpt);
            models.l2t.save(ckpt / "l2t.ckpt");
            models.lg.save(ckpt / "lg.ckpt");
            if (report.eval.bleu4 > best_bleu) {
                best_bleu = report.eval.bleu4;
                result.best_l2t_epoch = epoch;
                report.best_l2t = true;
            }
            if (report.eval.lf_acc > best_lf) {
                best_lf = report.eval.lf_acc;
                result.best_lg_epoch = epoch;
                report.best_lg = true;
            }
            result.reports.push_back(report);
            {
                std::ofstream os(run_log, std::ios::app);
                os << report.to_json().dump() << "\n";
            }
            manifest["epochs"].push_back(report.to_json());
            write_json(manifest_path, manifest);
            log("epoch " + std::to_string(epoch) + ": bleu4 " + std::to_string(report.eval.bleu4) + ", lf_acc " +
                std::to_string(report.eval.lf_acc));
        }

        stage = "model selection";
        int last = config.joint_epochs;
        auto ckpt_of = [&](int epoch, const char* name) {
            return root / "checkpoints" / ("epoch-" + std::to_string(epoch)) / name;
        };
        if (result.best_l2t_epoch && *result.best_l2t_epoch != last) models.l2t.load(ckpt_of(*result.best_l2t_epoch, "l2t.ckpt"));
        if (result.best_lg_epoch && *result.best_lg_epoch != last) models.lg.load(ckpt_of(*result.best_lg_epoch, "lg.ckpt"));
    } catch (const Error& e) {
        manifest["status"] = "failed";
        manifest["error"] = stage + ": " + e.what();
        try {
            write_json(manifest_path, manifest);
        } catch (const std::exception&) {
        }
        throw TrainingError(stage + ": " + e.what(), result.reports);
    }

    manifest["status"] = "complete";
    nlohmann::json best = nlohmann::json::object();
    if (result.best_l2t_epoch) {
        best["l2t_epoch"] = *result.best_l2t_epoch;
        best["l2t_checkpoint"] = "checkpoints/epoch-" + std::to_string(*result.best_l2t_epoch) + "/l2t.ckpt";
    }
    if (result.best_lg_epoch) {
        best["lg_epoch"] = *result.best_lg_epoch;
        best["lg_checkpoint"] = "checkpoints/epoch-" + std::to_string(*result.best_lg_epoch) + "/lg.ckpt";
    }
    manifest["best"] = best;
    manifest["warnings"] = result.warnings.size();
    write_json(manifest_path, manifest);
    return result;
}

}  // namespace logicloom
