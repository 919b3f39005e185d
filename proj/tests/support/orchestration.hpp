#pragma once

// Joint-training transcript harness: spy students and teachers, 7 unpaired
// LFs and 5 unpaired texts with fixed weights, and a classifier that sorts
// every pair a student received into back-translation, self-training or
// supervised data.

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "logicloom/jointtrain.hpp"
#include "support/spy_model.hpp"

namespace logicloom::testing {

struct OrchestrationSetup {
    std::map<std::string, Table> tables;
    Corpus supervised;
    Corpus validation;
    std::vector<UnpairedItem> lfs;
    std::vector<UnpairedItem> texts;
    std::vector<double> lf_weights = {0.3, 0.9, 0.5, 0.9, 0.1, 0.7, 0.2};
    std::vector<double> text_weights = {0.4, 0.8, 0.4, 1.0, 0.6};
};

inline OrchestrationSetup make_orchestration_setup() {
    OrchestrationSetup s;
    Table t("t", "2010 cup", {"player", "goals"}, {{"p0", "1"}, {"p1", "2"}, {"p2", "3"}, {"p3", "4"}, {"p4", "5"},
                                                   {"p5", "6"}, {"p6", "7"}});
    s.tables.emplace("t", t);
    s.supervised.tables = s.tables;
    s.supervised.instances = {{LogicType::count, "t", "eq { count { all_rows } ; 7 }", "there are 7 players"},
                              {LogicType::superlative, "t", "eq { hop { argmax { all_rows ; goals } ; player } ; p6 }",
                               "p6 scored the most goals"}};
    s.validation.tables = s.tables;
    s.validation.instances = {{LogicType::count, "t", "eq { count { filter_greater { all_rows ; goals ; 3 } } ; 4 }",
                               "4 players scored more than 3 goals"}};
    for (int k = 0; k < 7; ++k) {
        s.lfs.push_back({ItemKind::lf, LogicType::count, "t",
                         "eq { count { filter_eq { all_rows ; player ; p" + std::to_string(k) + " } } ; 1 }"});
    }
    for (int k = 0; k < 5; ++k) {
        s.texts.push_back({ItemKind::text, LogicType::count, "t", "player p" + std::to_string(k) + " scored goals"});
    }
    return s;
}

struct Delivered {
    std::vector<WeightedPair> bt;
    std::vector<WeightedPair> st;
    std::vector<WeightedPair> supervised;
    std::vector<WeightedPair> unknown;
};

struct Transcript {
    RunResult result;
    SpyLog log;
    Delivered l2t;
    Delivered lg;
    std::size_t teacher_train_calls = 0;
    int provider_calls = 0;
    /// Violations of the teacher freezing contract.
    std::vector<std::string> teacher_problems;
};

inline Delivered classify_pairs(const std::vector<WeightedPair>& pairs, const std::vector<UnpairedItem>& real_targets,
                                const std::vector<UnpairedItem>& real_sources) {
    Delivered d;
    auto in = [](const Tokens& t, const std::vector<UnpairedItem>& items) {
        return std::any_of(items.begin(), items.end(), [&](const UnpairedItem& i) { return from_wire(i.value) == t; });
    };
    for (const auto& p : pairs) {
        if (in(p.target, real_targets)) {
            d.bt.push_back(p);
        } else if (in(payload_of(p.source), real_sources)) {
            d.st.push_back(p);
        } else if (p.weight == 1.0) {
            d.supervised.push_back(p);
        } else {
            d.unknown.push_back(p);
        }
    }
    return d;
}

/// Runs the orchestrator with spy models and records what every model saw.
inline Transcript run_transcript(const OrchestrationSetup& s, TrainConfig config) {
    Transcript tr;
    SpyModel l2t("l2t", &tr.log), lg("lg", &tr.log), l2t_teacher("l2t_teacher", &tr.log), lg_teacher("lg_teacher", &tr.log);
    JointModels models{l2t, lg, l2t_teacher, lg_teacher};
    RunOptions options;
    options.weights = [&](JointModels&) {
        ++tr.provider_calls;
        std::vector<WeightedItem> wl, wt;
        for (std::size_t i = 0; i < s.lfs.size(); ++i) wl.push_back({s.lfs[i], s.lf_weights[i], "", ""});
        for (std::size_t i = 0; i < s.texts.size(); ++i) wt.push_back({s.texts[i], s.text_weights[i], "", ""});
        return std::make_pair(wl, wt);
    };
    options.log = [&](const std::string& msg) {
        if (msg.rfind("epoch ", 0) == 0) tr.log.events.push_back({"run", "epoch", 0, 0});
    };
    tr.result = run(config, s.supervised, s.validation, s.tables, s.lfs, s.texts, models, options);

    tr.l2t = classify_pairs(l2t.all_pairs(), s.texts, s.lfs);
    tr.lg = classify_pairs(lg.all_pairs(), s.lfs, s.texts);
    tr.teacher_train_calls = l2t_teacher.train_calls.size() + lg_teacher.train_calls.size();

    // Within each epoch a teacher answers from one frozen version, and its
    // reload happens only after its last generation of that epoch.
    for (const char* teacher : {"l2t_teacher", "lg_teacher"}) {
        std::set<int> versions;
        bool reloaded = false;
        std::vector<int> per_epoch;
        int loads = 0;
        for (const auto& e : tr.log.events) {
            if (e.model == "run") {
                if (versions.size() > 1) tr.teacher_problems.push_back(std::string(teacher) + " changed within an epoch");
                if (!versions.empty()) per_epoch.push_back(*versions.begin());
                versions.clear();
                reloaded = false;
                continue;
            }
            if (e.model != teacher) continue;
            if (e.op == "train") tr.teacher_problems.push_back(std::string(teacher) + " received a train call");
            if (e.op == "load") {
                reloaded = true;
                ++loads;
            }
            if (e.op == "generate") {
                if (reloaded && !per_epoch.empty()) {
                    tr.teacher_problems.push_back(std::string(teacher) + " reloaded before its last generation");
                }
                versions.insert(e.version);
            }
        }
        for (std::size_t i = 1; i < per_epoch.size(); ++i) {
            if (per_epoch[i] == per_epoch[i - 1]) tr.teacher_problems.push_back(std::string(teacher) + " not refreshed by sync");
        }
        if (loads != config.joint_epochs + 1) tr.teacher_problems.push_back(std::string(teacher) + " load count mismatch");
    }
    return tr;
}

/// Expected sequence of (value, weight) for one stream: items in curriculum
/// order when enabled, all weights 1 when weighting is off.
inline std::vector<std::pair<Tokens, double>> expected_stream(const std::vector<UnpairedItem>& items,
                                                              const std::vector<double>& weights,
                                                              const TrainConfig& config) {
    std::vector<std::pair<Tokens, double>> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out.emplace_back(from_wire(items[i].value), config.enable_weighting ? weights[i] : 1.0);
    }
    if (config.enable_curriculum) {
        std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    }
    return out;
}

}  // namespace logicloom::testing
