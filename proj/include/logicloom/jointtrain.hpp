#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "logicloom/metrics.hpp"
#include "logicloom/model.hpp"
#include "logicloom/weighting.hpp"

namespace logicloom {

struct TrainConfig {
    int pretrain_epochs = 1;
    int joint_epochs = 1;
    int finetune_epochs_per_joint = 1;
    int beam_size = 3;
    std::size_t batch_size = 2;
    bool enable_bt = true;
    bool enable_st = true;
    bool enable_curriculum = true;
    bool enable_weighting = true;
    /// Experimental: recompute weights with the teachers before every joint
    /// epoch after the first.
    bool reweigh_each_epoch = false;
    std::uint64_t seed = 42;

    /// Throws InputError on negative counts, beam < 1 or batch < 1.
    void validate() const;
    nlohmann::json to_json() const;
    /// Missing keys keep their defaults; unknown keys are rejected.
    static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochReport {
    int epoch = 0;
    std::size_t bt_pairs_l2t = 0;
    std::size_t bt_pairs_lg = 0;
    std::size_t st_pairs_l2t = 0;
    std::size_t st_pairs_lg = 0;
    std::size_t finetune_pairs = 0;
    /// Items whose teacher generation failed (or was empty where a target is needed).
    std::size_t skipped = 0;
    EvalBundle eval;
    bool best_l2t = false;
    bool best_lg = false;

    nlohmann::json to_json() const;
    static EpochReport from_json(const nlohmann::json& j);
};

/// The four model endpoints. Teachers only ever generate and load.
struct JointModels {
    GenerativeModel& l2t;
    GenerativeModel& lg;
    GenerativeModel& l2t_teacher;
    GenerativeModel& lg_teacher;
};

/// Supervised pairs for one role (L2T or LG) from every instance of `corpus`.
std::vector<WeightedPair> supervised_pairs(const Corpus& corpus, Role role);

/// Trains both models on the supervised corpus for `epochs` passes, each pass
/// in a freshly shuffled order. Returns the number of pairs each model received.
std::size_t pretrain(GenerativeModel& l2t, GenerativeModel& lg, const Corpus& supervised, int epochs,
                     std::size_t batch_size, std::uint64_t seed);

struct StepCounts {
    std::size_t l2t_pairs = 0;
    std::size_t lg_pairs = 0;
    std::size_t skipped = 0;
};

/// Back-translation: teacher-made pseudo sources paired with real targets.
StepCounts bt_step(JointModels& models, std::span<const WeightedItem> lfs, std::span<const WeightedItem> texts,
                   const std::map<std::string, Table>& tables, const TrainConfig& config,
                   std::vector<std::string>* warnings = nullptr);

/// Self-training: real sources paired with the same-direction teacher's outputs.
StepCounts st_step(JointModels& models, std::span<const WeightedItem> lfs, std::span<const WeightedItem> texts,
                   const std::map<std::string, Table>& tables, const TrainConfig& config,
                   std::vector<std::string>* warnings = nullptr);

/// Generates texts with `l2t` and LFs with `lg` for every instance of `test`.
EvalBundle evaluate(GenerativeModel& l2t, GenerativeModel& lg, const Corpus& test, int beam_size,
                    ExecMode mode = ExecMode::truthy);

using WeightProvider =
    std::function<std::pair<std::vector<WeightedItem>, std::vector<WeightedItem>>(JointModels& models)>;

struct RunOptions {
    /// Run log, manifest and checkpoints go here; empty keeps them in a
    /// temporary directory that is removed afterwards.
    std::filesystem::path run_dir;
    ExecMode exec_mode = ExecMode::truthy;
    /// Replaces the built-in weight computation (e.g. to reuse persisted weights).
    WeightProvider weights;
    const Embedder* embedder = nullptr;
    std::function<void(const std::string&)> log;
};

struct RunResult {
    std::vector<EpochReport> reports;
    std::vector<WeightedItem> weighted_lfs;
    std::vector<WeightedItem> weighted_texts;
    std::optional<int> best_l2t_epoch;
    std::optional<int> best_lg_epoch;
    std::vector<std::string> warnings;
};

class TrainingError : public ModelError {
public:
    TrainingError(const std::string& message, std::vector<EpochReport> partial)
        : ModelError(message), partial_(std::move(partial)) {}
    const std::vector<EpochReport>& partial() const { return partial_; }

private:
    std::vector<EpochReport> partial_;
};

/// pretrain, sync teachers, weigh, order, then per joint epoch: BT, ST,
/// fine-tune, sync, evaluate and checkpoint. Students end holding their best
/// validation checkpoints (BLEU-4 for L2T, LF accuracy for LG).
RunResult run(const TrainConfig& config, const Corpus& supervised, const Corpus& validation,
              const std::map<std::string, Table>& tables, std::span<const UnpairedItem> lfs,
              std::span<const UnpairedItem> texts, JointModels& models, const RunOptions& options = {});

}  // namespace logicloom
