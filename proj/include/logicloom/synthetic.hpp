#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>

#include "logicloom/table.hpp"

namespace logicloom {

struct SyntheticOptions {
    std::size_t tables = 50;
    std::uint64_t seed = 7;
    /// Share of tables whose instances go to validation and to test.
    double validation_fraction = 0.15;
    double test_fraction = 0.15;
};

struct SyntheticCorpus {
    Corpus train;
    Corpus validation;
    Corpus test;
    /// Every generated table, the pool for augmentation.
    std::map<std::string, Table> tables;
};

/// A random small table (3-8 rows) drawn from a handful of themes.
Table synthetic_table(const std::string& id, std::mt19937_64& rng);

/// Tables plus one gold instance per (table, logic type) that the sampler
/// can satisfy: LF from sample_lf, text from realize_template.
SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& options = {});

}  // namespace logicloom
