#include "logicloom/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "logicloom/lf.hpp"

namespace logicloom {

nlohmann::json weighted_to_json(const WeightedItem& w) {
    nlohmann::json j = item_to_json(w.item);
    j["weight"] = w.weight;
    j["forward"] = w.forward;
    j["round_trip"] = w.round_trip;
    return j;
}

WeightedItem weighted_from_json(const nlohmann::json& j) {
    try {
        WeightedItem w;
        w.item = item_from_json(j);
        w.weight = j.at("weight").get<double>();
        w.forward = j.value("forward", "");
        w.round_trip = j.value("round_trip", "");
        if (!(w.weight >= 0 && w.weight <= 1)) throw InputError("weight outside [0, 1]");
        return w;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("bad weighted item: ") + e.what());
    }
}

double lf_similarity(std::string_view reconstruction, std::string_view original, const Embedder& embedder) {
    Tokens a = split_whitespace(canonical_lf(reconstruction));
    Tokens b = split_whitespace(canonical_lf(original));
    if (a.empty() || b.empty()) return 0.0;
    return greedy_match_f1(a, b, embedder);
}

double text_similarity(std::string_view reconstruction, std::string_view original, const Embedder& embedder) {
    MetricTokenizer tok;
    Tokens a = tok.tokenize(reconstruction);
    Tokens b = tok.tokenize(original);
    if (a.empty() || b.empty()) return 0.0;
    return greedy_match_f1(a, b, embedder);
}

std::vector<WeightedItem> weight_items(std::span<const UnpairedItem> items, const std::map<std::string, Table>& tables,
                                       GenerativeModel& l2t, GenerativeModel& lg, const Embedder& embedder,
                                       const WeightingOptions& options, std::vector<std::string>* warnings) {
    std::vector<const Table*> table_of;
    for (const auto& item : items) {
        auto it = tables.find(item.table_id);
        if (it == tables.end()) throw InputError("augmented item refers to unknown table '" + item.table_id + "'");
        table_of.push_back(&it->second);
    }
    std::vector<WeightedItem> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back({item, 0.0, {}, {}});

    // Items are processed per kind so each hop is one batched pass per model.
    for (ItemKind kind : {ItemKind::lf, ItemKind::text}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (items[i].kind == kind) idx.push_back(i);
        }
        if (idx.empty()) continue;
        bool is_lf = kind == ItemKind::lf;
        GenerativeModel& first = is_lf ? l2t : lg;
        GenerativeModel& second = is_lf ? lg : l2t;
        Role first_role = is_lf ? Role::l2t : Role::lg;
        Role second_role = is_lf ? Role::lg : Role::l2t;

        std::vector<Tokens> inputs;
        for (auto i : idx) inputs.push_back(serialize_input(first_role, items[i].logic_type, *table_of[i], items[i].value).tokens);
        auto forward = generate_chunked(first, inputs, options.beam_size, options.chunk_size, warnings, is_lf ? "lf forward" : "text forward");

        std::vector<std::size_t> live;
        inputs.clear();
        for (std::size_t k = 0; k < idx.size(); ++k) {
            auto i = idx[k];
            if (!forward[k]) continue;
            out[i].forward = to_wire(*forward[k]);
            if (forward[k]->empty()) {
                if (warnings) warnings->push_back(std::string(to_string(kind)) + " item " + std::to_string(i) + ": empty forward translation");
                continue;
            }
            live.push_back(i);
            inputs.push_back(serialize_input(second_role, items[i].logic_type, *table_of[i], out[i].forward).tokens);
        }
        auto back = generate_chunked(second, inputs, options.beam_size, options.chunk_size, warnings, is_lf ? "lf round trip" : "text round trip");
        for (std::size_t k = 0; k < live.size(); ++k) {
            auto i = live[k];
            if (!back[k]) continue;
            out[i].round_trip = to_wire(*back[k]);
            double w = is_lf ? lf_similarity(out[i].round_trip, items[i].value, embedder)
                             : text_similarity(out[i].round_trip, items[i].value, embedder);
            out[i].weight = std::clamp(w, 0.0, 1.0);
        }
    }
    return out;
}

namespace {

void require_kind(std::span<const UnpairedItem> items, ItemKind kind) {
    for (const auto& item : items) {
        if (item.kind != kind) throw InputError("expected only " + std::string(to_string(kind)) + " items");
    }
}

}  // namespace

std::vector<WeightedItem> weight_lfs(std::span<const UnpairedItem> lfs, const std::map<std::string, Table>& tables,
                                     GenerativeModel& l2t, GenerativeModel& lg, const Embedder& embedder,
                                     const WeightingOptions& options, std::vector<std::string>* warnings) {
    require_kind(lfs, ItemKind::lf);
    return weight_items(lfs, tables, l2t, lg, embedder, options, warnings);
}

std::vector<WeightedItem> weight_texts(std::span<const UnpairedItem> texts, const std::map<std::string, Table>& tables,
                                       GenerativeModel& l2t, GenerativeModel& lg, const Embedder& embedder,
                                       const WeightingOptions& options, std::vector<std::string>* warnings) {
    require_kind(texts, ItemKind::text);
    return weight_items(texts, tables, l2t, lg, embedder, options, warnings);
}

std::vector<WeightedItem> unit_weights(std::span<const UnpairedItem> items) {
    std::vector<WeightedItem> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back({item, 1.0, {}, {}});
    return out;
}

std::vector<WeightedItem> curriculum_sort(std::vector<WeightedItem> items) {
    std::stable_sort(items.begin(), items.end(),
                     [](const WeightedItem& a, const WeightedItem& b) { return a.weight > b.weight; });
    return items;
}

std::pair<double, double> weight_stats(std::span<const double> weights) {
    if (weights.empty()) throw InputError("weight_stats of an empty set");
    double mean = 0;
    for (double w : weights) mean += w;
    mean /= static_cast<double>(weights.size());
    double var = 0;
    for (double w : weights) var += (w - mean) * (w - mean);
    var /= static_cast<double>(weights.size());
    return {mean, std::sqrt(var)};
}

std::pair<double, double> weight_stats(std::span<const WeightedItem> items) {
    std::vector<double> w;
    w.reserve(items.size());
    for (const auto& item : items) w.push_back(item.weight);
    return weight_stats(std::span<const double>(w));
}

void write_weighted_jsonl(const std::filesystem::path& path, std::span<const WeightedItem> items) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path.string());
    for (const auto& w : items) os << weighted_to_json(w).dump() << "\n";
}

std::vector<WeightedItem> read_weighted_jsonl(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot read " + path.string());
    std::vector<WeightedItem> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            out.push_back(weighted_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error& e) {
            throw InputError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace logicloom
