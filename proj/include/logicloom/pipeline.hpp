#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "json.hpp"
#include "logicloom/augment.hpp"
#include "logicloom/jointtrain.hpp"
#include "logicloom/metrics.hpp"
#include "logicloom/table.hpp"

namespace logicloom {

struct ModelSpecs {
    std::string l2t = "retrieval";
    std::string lg = "retrieval";
    /// Default to the student descriptors (a separate instance each).
    std::string l2t_teacher;
    std::string lg_teacher;
    std::string d2l = "retrieval";
    std::string d2t = "retrieval";
};

struct PipelineConfig {
    enum class DatasetFormat { corpus, logic2text };

    std::filesystem::path run_dir;
    DatasetFormat dataset_format = DatasetFormat::corpus;
    std::filesystem::path train_path;
    std::filesystem::path validation_path;
    std::filesystem::path test_path;
    FieldMap field_map;
    /// Extra tables for augmentation on top of the dataset tables.
    std::optional<std::filesystem::path> tables_path;
    TableFormat tables_format = TableFormat::json;
    /// Few-shot: keep this many training instances, stratified by logic type.
    std::optional<std::size_t> few_shot;
    std::uint64_t few_shot_seed = 1;

    ModelSpecs models;
    std::chrono::milliseconds model_timeout{std::chrono::minutes(10)};
    int da_train_epochs = 1;
    std::string tokenizer = "whitespace";
    FilterOptions filter;
    ExecMode exec_mode = ExecMode::truthy;
    TrainConfig train;

    /// Relative paths resolve against `base_dir`. LOGICLOOM_RUN_DIR, when set,
    /// replaces run_dir.
    static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    static PipelineConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
    /// Throws InputError when a referenced path is missing or a value is out of range.
    void validate() const;
};

/// Error raised by a pipeline stage; `input()` tells input problems from
/// model or execution failures.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& message, bool input)
        : Error(stage + ": " + message), stage_(std::move(stage)), input_(input) {}
    const std::string& stage() const { return stage_; }
    bool input() const { return input_; }

private:
    std::string stage_;
    bool input_;
};

struct PipelineResult {
    EvalBundle test_eval;
    std::vector<std::string> resumed_stages;
};

/// augment -> weigh -> train -> evaluate with artifacts under run_dir. A stage
/// whose artifacts already exist is loaded instead of recomputed.
PipelineResult run_pipeline(const PipelineConfig& config,
                            const std::function<void(const std::string&)>& log = {});

}  // namespace logicloom
