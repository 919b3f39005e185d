#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "logicloom/augment.hpp"
#include "logicloom/metrics.hpp"
#include "logicloom/model.hpp"

namespace logicloom {

struct WeightedItem {
    UnpairedItem item;
    double weight = 0;
    std::string forward;
    std::string round_trip;
};

nlohmann::json weighted_to_json(const WeightedItem& w);
WeightedItem weighted_from_json(const nlohmann::json& j);

/// Greedy-match F1 between two LFs over their canonical-print tokens.
double lf_similarity(std::string_view reconstruction, std::string_view original, const Embedder& embedder);
/// Greedy-match F1 between two texts over metric tokens.
double text_similarity(std::string_view reconstruction, std::string_view original, const Embedder& embedder);

struct WeightingOptions {
    int beam_size = 3;
    /// Inputs per generate call.
    std::size_t chunk_size = 256;
};

/// Round trip through the two models: LFs go l2t then lg, texts lg then l2t.
/// A model failure or an empty translation gives weight 0 and a warning.
std::vector<WeightedItem> weight_items(std::span<const UnpairedItem> items, const std::map<std::string, Table>& tables,
                                       GenerativeModel& l2t, GenerativeModel& lg, const Embedder& embedder,
                                       const WeightingOptions& options = {}, std::vector<std::string>* warnings = nullptr);

/// Same as weight_items; throw InputError on an item of the other kind.
std::vector<WeightedItem> weight_lfs(std::span<const UnpairedItem> lfs, const std::map<std::string, Table>& tables,
                                     GenerativeModel& l2t, GenerativeModel& lg, const Embedder& embedder,
                                     const WeightingOptions& options = {}, std::vector<std::string>* warnings = nullptr);
std::vector<WeightedItem> weight_texts(std::span<const UnpairedItem> texts, const std::map<std::string, Table>& tables,
                                       GenerativeModel& l2t, GenerativeModel& lg, const Embedder& embedder,
                                       const WeightingOptions& options = {}, std::vector<std::string>* warnings = nullptr);

/// Every item with weight 1, for runs without weighting.
std::vector<WeightedItem> unit_weights(std::span<const UnpairedItem> items);

/// Stable sort by weight, highest first.
std::vector<WeightedItem> curriculum_sort(std::vector<WeightedItem> items);

/// Mean and population standard deviation. Throws InputError when empty.
std::pair<double, double> weight_stats(std::span<const double> weights);
std::pair<double, double> weight_stats(std::span<const WeightedItem> items);

void write_weighted_jsonl(const std::filesystem::path& path, std::span<const WeightedItem> items);
std::vector<WeightedItem> read_weighted_jsonl(const std::filesystem::path& path);

}  // namespace logicloom
