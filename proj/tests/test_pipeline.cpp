#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "logicloom/pipeline.hpp"
#include "logicloom/synthetic.hpp"
#include "support/fixtures.hpp"

using namespace logicloom;
using namespace logicloom::testing;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct CliResult {
    int exit_code = -1;
    std::string out;
};

CliResult run_cli(const std::string& args, const std::string& stdin_text = {}) {
    std::string cmd = std::string(LOGICLOOM_CLI) + " " + args + " 2>/dev/null";
    fs::path input;
    if (!stdin_text.empty()) {
        input = fs::temp_directory_path() / "logicloom_cli_stdin.txt";
        std::ofstream(input) << stdin_text;
        cmd += " < " + input.string();
    }
    CliResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string write_file(const fs::path& path, const std::string& text) {
    std::ofstream(path) << text;
    return path.string();
}

PipelineConfig synthetic_config(const fs::path& run_dir) {
    auto config = PipelineConfig::load(source_dir() / "configs" / "synthetic.json");
    config.run_dir = run_dir;
    return config;
}

}  // namespace

TEST(Pipeline, SyntheticRunWritesArtifactsThatParseBack) {
    auto dir = fresh_dir("logicloom_pipeline_e2e");
    auto config = synthetic_config(dir);
    std::vector<std::string> lines;
    auto result = run_pipeline(config, [&](const std::string& m) { lines.push_back(m); });
    EXPECT_TRUE(result.resumed_stages.empty());
    EXPECT_EQ(result.test_eval.n, corpus_from_json(read_json(config.test_path)).instances.size());
    EXPECT_GT(result.test_eval.bleu4, 0.0);

    auto pipeline = read_json(dir / "pipeline.json");
    EXPECT_EQ(pipeline["config"]["train"], config.train.to_json());
    auto train = corpus_from_json(read_json(dir / "data" / "train.json"));
    EXPECT_EQ(train.instances.size(), corpus_from_json(read_json(config.train_path)).instances.size());
    auto tables = read_json(dir / "data" / "tables.json");
    for (const auto& t : tables.at("tables")) EXPECT_NO_THROW(table_from_json(t));

    auto lfs = read_items_jsonl(dir / "augment" / "lfs.jsonl");
    auto texts = read_items_jsonl(dir / "augment" / "texts.jsonl");
    auto stats = read_json(dir / "augment" / "stats.json");
    EXPECT_EQ(stats["lf"]["kept"].get<std::size_t>(), lfs.size());
    EXPECT_EQ(stats["text"]["kept"].get<std::size_t>(), texts.size());
    for (const char* side : {"lf", "text"}) {
        const auto& s = stats[side];
        EXPECT_EQ(s["generated"].get<std::size_t>(),
                  s["kept"].get<std::size_t>() + s["dropped_length"].get<std::size_t>() +
                      s["dropped_duplicate"].get<std::size_t>());
        EXPECT_EQ(s["generation_calls"].get<std::size_t>(), 7 * tables.at("tables").size());
    }

    EXPECT_EQ(read_weighted_jsonl(dir / "weights" / "lfs.jsonl").size(), lfs.size());
    EXPECT_EQ(read_weighted_jsonl(dir / "weights" / "texts.jsonl").size(), texts.size());
    EXPECT_TRUE(read_json(dir / "weights" / "stats.json").is_object());

    auto manifest = read_json(dir / "train" / "manifest.json");
    EXPECT_EQ(manifest["status"], "complete");
    std::ifstream run_log(dir / "train" / "run_log.jsonl");
    std::string line;
    int epochs = 0;
    while (std::getline(run_log, line)) {
        EXPECT_EQ(EpochReport::from_json(nlohmann::json::parse(line)).epoch, ++epochs);
    }
    EXPECT_EQ(epochs, config.train.joint_epochs);

    auto test_eval = EvalBundle::from_json(read_json(dir / "eval" / "test_eval.json").at("eval"));
    EXPECT_EQ(test_eval.to_json(), result.test_eval.to_json());
    EXPECT_TRUE(read_json(dir / "eval" / "quality_report.json").is_object());
    fs::remove_all(dir);
}

TEST(Pipeline, SecondRunResumesEveryStage) {
    auto dir = fresh_dir("logicloom_pipeline_resume");
    auto config = synthetic_config(dir);
    auto first = run_pipeline(config);
    auto second = run_pipeline(config);
    EXPECT_EQ(second.resumed_stages, (std::vector<std::string>{"augment", "train", "evaluate"}));
    EXPECT_EQ(second.test_eval.to_json(), first.test_eval.to_json());

    // Dropping the evaluation re-runs only that stage, with the same numbers.
    fs::remove_all(dir / "eval");
    auto third = run_pipeline(config);
    EXPECT_EQ(third.resumed_stages, (std::vector<std::string>{"augment", "train"}));
    EXPECT_EQ(third.test_eval.to_json(), first.test_eval.to_json());
    fs::remove_all(dir);
}

TEST(Pipeline, SampledLfsPassQualityReport) {
    auto corpus = make_synthetic_corpus();
    std::vector<UnpairedItem> lfs;
    for (const auto& inst : corpus.train.instances) lfs.push_back({ItemKind::lf, inst.logic_type, inst.table_id, inst.lf});
    ASSERT_FALSE(lfs.empty());
    auto q = quality_report(lfs, {}, corpus.tables, nullptr);
    EXPECT_EQ(q.lf_count, lfs.size());
    EXPECT_EQ(q.lf_parseable, 1.0);
    EXPECT_EQ(q.lf_executable, 1.0);
    EXPECT_EQ(q.lf_true, 1.0);
    EXPECT_EQ(q.lf_topic_consistency, 1.0);
}

TEST(Pipeline, SyntheticCorpusIsDeterministic) {
    auto a = make_synthetic_corpus();
    auto b = make_synthetic_corpus();
    EXPECT_EQ(corpus_to_json(a.train), corpus_to_json(b.train));
    EXPECT_EQ(a.tables.size(), 50u);
    SyntheticOptions other;
    other.seed = 8;
    EXPECT_NE(corpus_to_json(make_synthetic_corpus(other).train), corpus_to_json(a.train));
}

TEST(Pipeline, ConfigErrors) {
    auto base = source_dir() / "configs";
    nlohmann::json good = read_json(base / "synthetic.json");
    EXPECT_NO_THROW(PipelineConfig::from_json(good, base).validate());

    auto bad = good;
    bad["learning_rate"] = 0.1;
    EXPECT_THROW(PipelineConfig::from_json(bad, base), InputError);
    bad = good;
    bad.erase("dataset");
    EXPECT_THROW(PipelineConfig::from_json(bad, base), InputError);
    bad = good;
    bad["models"]["d2x"] = "retrieval";
    EXPECT_THROW(PipelineConfig::from_json(bad, base), InputError);
    bad = good;
    bad["train"]["joint_epochs"] = -1;
    EXPECT_THROW(PipelineConfig::from_json(bad, base), InputError);
    bad = good;
    bad["dataset"]["train"] = "../data/synthetic/missing.json";
    EXPECT_THROW(PipelineConfig::from_json(bad, base).validate(), InputError);

    auto config = PipelineConfig::from_json(bad, base);
    config.run_dir = fresh_dir("logicloom_pipeline_bad");
    try {
        run_pipeline(config);
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "load");
        EXPECT_TRUE(e.input());
    }
    fs::remove_all(config.run_dir);
}

TEST(Pipeline, ConfigPathsResolveAgainstConfigDirectory) {
    auto config = PipelineConfig::load(source_dir() / "configs" / "synthetic.json");
    EXPECT_EQ(fs::weakly_canonical(config.train_path), fs::weakly_canonical(source_dir() / "data/synthetic/train.json"));
    auto back = PipelineConfig::from_json(config.to_json(), "/");
    EXPECT_EQ(back.to_json(), config.to_json());
}

TEST(Cli, LfParsePrintsCanonicalForm) {
    auto r = run_cli("lf parse 'eq{count{all_rows};3}'");
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_EQ(r.out, "eq { count { all_rows } ; 3 }\n");
    auto j = run_cli("lf parse --json 'eq { count { all_rows } ; 3 }'");
    EXPECT_EQ(j.exit_code, 0);
    auto doc = nlohmann::json::parse(j.out);
    EXPECT_EQ(doc["topic"], "count");
    EXPECT_EQ(doc["depth"], 3);
    EXPECT_EQ(run_cli("lf parse 'eq { count { all_rows } ; 3'").exit_code, 1);
    EXPECT_EQ(run_cli("lf parse 'frobnicate { all_rows }'").exit_code, 1);
}

TEST(Cli, LfExecPrintsValueJson) {
    auto dir = fresh_dir("logicloom_cli_exec");
    auto table = write_file(dir / "scores.csv", "player,goals\nanna,3\nbruno,5\ncarla,3\n");
    auto r = run_cli("lf exec 'sum { all_rows ; goals }' --table " + table);
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_EQ(nlohmann::json::parse(r.out), (nlohmann::json{{"num", 11}}));
    auto b = run_cli("lf exec 'eq { hop { argmax { all_rows ; goals } ; player } ; bruno }' --table " + table);
    EXPECT_EQ(nlohmann::json::parse(b.out), (nlohmann::json{{"bool", true}}));
    auto e = run_cli("lf exec 'hop { filter_eq { all_rows ; goals ; 3 } ; player }' --table " + table);
    EXPECT_EQ(e.exit_code, 2);
    EXPECT_EQ(nlohmann::json::parse(e.out)["error"], "ExactlyOneRowRequired");
    // Unknown columns fail table validation before execution.
    EXPECT_EQ(run_cli("lf exec 'max { all_rows ; assists }' --table " + table).exit_code, 1);
    EXPECT_EQ(run_cli("lf exec 'count { all_rows }' --table " + (dir / "none.csv").string()).exit_code, 1);
    EXPECT_EQ(run_cli("lf exec 'count { all_rows }'").exit_code, 1);
    fs::remove_all(dir);
}

TEST(Cli, LfValidateReportsTableErrors) {
    auto dir = fresh_dir("logicloom_cli_validate");
    auto table = write_file(dir / "scores.csv", "player,goals\nanna,3\n");
    EXPECT_EQ(run_cli("lf validate 'eq { count { all_rows } ; 1 }' --table " + table).exit_code, 0);
    auto r = run_cli("lf validate 'max { all_rows ; assists }' --table " + table);
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_FALSE(nlohmann::json::parse(r.out)["table_valid"].get<bool>());
    fs::remove_all(dir);
}

TEST(Cli, EvalScoresAlignedFilesAndRejectsMisalignment) {
    auto dir = fresh_dir("logicloom_cli_eval");
    auto pred = write_file(dir / "pred.txt", "the cat sat on the mat\na dog ran\n");
    auto gold = write_file(dir / "gold.txt", "the cat sat on the mat\na dog ran\n");
    auto short_gold = write_file(dir / "short.txt", "the cat sat on the mat\n");
    auto out = dir / "report.json";
    auto r = run_cli("eval --text-pred " + pred + " --text-gold " + gold + " --out " + out.string());
    EXPECT_EQ(r.exit_code, 0);
    auto report = read_json(out);
    EXPECT_DOUBLE_EQ(report["bleu4"].get<double>(), 100.0);
    EXPECT_TRUE(report["lf_acc"].is_null());
    EXPECT_EQ(run_cli("eval --text-pred " + pred + " --text-gold " + short_gold).exit_code, 1);
    fs::remove_all(dir);
}

TEST(Cli, SynthWritesLoadableCorpus) {
    auto dir = fresh_dir("logicloom_cli_synth");
    auto r = run_cli("synth --tables 6 --seed 3 --out " + dir.string());
    ASSERT_EQ(r.exit_code, 0);
    auto train = corpus_from_json(read_json(dir / "train.json"));
    EXPECT_FALSE(train.instances.empty());
    EXPECT_EQ(read_json(dir / "tables.json")["tables"].size(), 6u);
    fs::remove_all(dir);
}

TEST(Cli, AnnotateProducesSilverLfs) {
    auto dir = fresh_dir("logicloom_cli_annotate");
    auto train_path = source_dir() / "data" / "synthetic" / "train.json";
    auto train = corpus_from_json(read_json(train_path));
    const auto& inst = train.instances.front();
    nlohmann::json line = {{"table_id", inst.table_id}, {"text", inst.text}, {"logic_type", to_string(inst.logic_type)}};
    auto input = write_file(dir / "in.jsonl", line.dump() + "\n");
    auto out = dir / "out.jsonl";
    auto r = run_cli("annotate --input " + input + " --tables " + (source_dir() / "data/synthetic/tables.json").string() +
                     " --train-corpus " + train_path.string() + " --out " + out.string());
    ASSERT_EQ(r.exit_code, 0);
    std::ifstream is(out);
    std::string row;
    ASSERT_TRUE(std::getline(is, row));
    auto j = nlohmann::json::parse(row);
    EXPECT_EQ(j["lf"], canonical_lf(inst.lf));
    EXPECT_TRUE(j["parseable"].get<bool>());
    EXPECT_TRUE(j["table_valid"].get<bool>());
    EXPECT_EQ(j["exec_result"], (nlohmann::json{{"bool", true}}));
    fs::remove_all(dir);
}

TEST(Cli, ServeSpeaksLineProtocolOverStdio) {
    std::string requests =
        R"({"id":1,"op":"hello"})"
        "\n"
        R"({"id":2,"op":"train","pairs":[{"source":"a b c","target":"x y","weight":1.0}]})"
        "\n"
        R"({"id":3,"op":"generate","inputs":["a b"],"beam_size":1})"
        "\n";
    auto r = run_cli("serve", requests);
    EXPECT_EQ(r.exit_code, 0);
    std::istringstream is(r.out);
    std::string line;
    std::vector<nlohmann::json> replies;
    while (std::getline(is, line)) replies.push_back(nlohmann::json::parse(line));
    ASSERT_EQ(replies.size(), 3u);
    EXPECT_EQ(replies[0]["id"], 1);
    EXPECT_TRUE(replies[0]["ok"].get<bool>());
    EXPECT_TRUE(replies[0].contains("version"));
    EXPECT_TRUE(replies[1]["ok"].get<bool>());
    EXPECT_EQ(replies[2]["outputs"], (nlohmann::json{"x y"}));
}

TEST(Cli, PipelineCommandAndExitCodes) {
    auto dir = fresh_dir("logicloom_cli_pipeline");
    auto r = run_cli("pipeline --config " + (source_dir() / "configs" / "synthetic.json").string() + " --run-dir " +
                     (dir / "run").string());
    ASSERT_EQ(r.exit_code, 0);
    auto summary = nlohmann::json::parse(r.out.substr(r.out.rfind("\n{") + 1));
    EXPECT_TRUE(summary["resumed"].empty());
    EXPECT_EQ(summary["run_dir"], (dir / "run").string());
    EXPECT_TRUE(fs::exists(dir / "run" / "eval" / "test_eval.json"));
    EXPECT_EQ(run_cli("pipeline --config " + (dir / "missing.json").string()).exit_code, 1);
    EXPECT_EQ(run_cli("").exit_code, 1);
    EXPECT_EQ(run_cli("no-such-command").exit_code, 1);
    fs::remove_all(dir);
}

TEST(Cli, PipelineOverridesReachTheRun) {
    auto dir = fresh_dir("logicloom_cli_overrides");
    auto config = (source_dir() / "configs" / "synthetic.json").string();
    auto r = run_cli("pipeline --config " + config + " --run-dir " + (dir / "run").string() +
                     " --exec-mode error-free --reweigh-each-epoch");
    ASSERT_EQ(r.exit_code, 0);
    auto recorded = read_json(dir / "run" / "pipeline.json")["config"];
    EXPECT_EQ(recorded["exec_mode"], "error-free");
    EXPECT_TRUE(recorded["train"]["reweigh_each_epoch"].get<bool>());
    EXPECT_EQ(run_cli("pipeline --config " + config + " --run-dir " + (dir / "other").string() + " --exec-mode loose")
                  .exit_code,
              1);
    fs::remove_all(dir);
}
