#include "logicloom/synthetic.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "logicloom/lf.hpp"

namespace logicloom {

namespace {

using Rng = std::mt19937_64;

std::size_t pick(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

template <typename T>
const T& choose(Rng& rng, const std::vector<T>& v) {
    return v[pick(rng, v.size())];
}

int uniform(Rng& rng, int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1)); }

const std::vector<std::string> kFirst = {"anna", "bruno", "carla", "dmitri", "elena", "felix", "greta", "hugo",
                                         "ines", "jonas", "karin", "lucas", "marta", "nils", "olga", "pavel",
                                         "rosa", "stefan", "tomas", "ulla", "vera", "walter", "yusuf", "zoe"};
const std::vector<std::string> kLast = {"almeida", "berg", "costa", "dahl", "eriksen", "fischer", "garcia", "horvat",
                                        "ivanova", "jansen", "kowalski", "lindqvist", "moreau", "novak", "ortega",
                                        "petrov", "quinn", "rossi", "silva", "tanaka", "varga", "weber"};
const std::vector<std::string> kTeams = {"harbor city", "north vale", "redwood", "east bay", "iron hill",
                                         "lakeside", "pine ridge", "stonebridge", "westfield", "coral coast"};
const std::vector<std::string> kParties = {"green", "labour", "liberal", "reform", "union", "independent"};
const std::vector<std::string> kCities = {"oslo", "lisbon", "krakow", "ghent", "turin", "porto", "bergen", "lyon",
                                          "malmo", "graz", "split", "tartu"};
const std::vector<std::string> kMonths = {"january", "february", "march", "april",   "may",      "june",
                                          "july",    "august",   "september", "october", "november", "december"};

std::string person(Rng& rng) { return choose(rng, kFirst) + " " + choose(rng, kLast); }

std::string date_text(Rng& rng, int year) {
    return choose(rng, kMonths) + " " + std::to_string(uniform(rng, 1, 28)) + " , " + std::to_string(year);
}

struct Theme {
    std::string caption_stem;
    std::vector<std::string> columns;
    std::function<std::vector<std::string>(Rng&, int)> row;
};

std::vector<Theme> themes() {
    return {
        {"league season",
         {"player", "team", "games", "goals", "assists"},
         [](Rng& r, int) {
             return std::vector<std::string>{person(r), choose(r, kTeams), std::to_string(uniform(r, 10, 38)),
                                             std::to_string(uniform(r, 0, 25)), std::to_string(uniform(r, 0, 15))};
         }},
        {"municipal election",
         {"candidate", "party", "votes", "share"},
         [](Rng& r, int) {
             int votes = uniform(r, 800, 45000);
             return std::vector<std::string>{person(r), choose(r, kParties),
                                             std::to_string(votes / 1000) + "," + std::to_string(100 + votes % 900),
                                             std::to_string(uniform(r, 2, 48)) + "." + std::to_string(uniform(r, 0, 9)) + "%"};
         }},
        {"grand prix results",
         {"driver", "constructor", "laps", "points", "race date"},
         [](Rng& r, int year) {
             return std::vector<std::string>{person(r), choose(r, kTeams), std::to_string(uniform(r, 40, 70)),
                                             std::to_string(uniform(r, 0, 25)), date_text(r, year)};
         }},
        {"film releases",
         {"title", "director", "year", "gross", "runtime"},
         [](Rng& r, int year) {
             std::string title = choose(r, kCities) + " " + choose(r, std::vector<std::string>{"nights", "story", "letters", "road", "winter", "harbor"});
             return std::vector<std::string>{title, person(r), std::to_string(year - uniform(r, 0, 12)),
                                             "$" + std::to_string(uniform(r, 1, 300)) + "," + std::to_string(100 + uniform(r, 0, 899)) + ",000",
                                             std::to_string(uniform(r, 85, 170))};
         }},
        {"city marathon",
         {"runner", "city", "age", "minutes", "bib"},
         [](Rng& r, int) {
             return std::vector<std::string>{person(r), choose(r, kCities), std::to_string(uniform(r, 19, 61)),
                                             std::to_string(uniform(r, 125, 290)), std::to_string(uniform(r, 100, 999))};
         }},
    };
}

}  // namespace

Table synthetic_table(const std::string& id, std::mt19937_64& rng) {
    static const std::vector<Theme> all = themes();
    const Theme& theme = choose(rng, all);
    int year = uniform(rng, 1985, 2019);
    int rows = uniform(rng, 3, 8);
    std::vector<std::vector<std::string>> cells;
    std::set<std::string> keys;
    while (static_cast<int>(cells.size()) < rows) {
        auto row = theme.row(rng, year);
        // Unique first column so rows can be addressed by name.
        if (!keys.insert(row[0]).second) continue;
        cells.push_back(std::move(row));
    }
    return Table(id, std::to_string(year) + " " + theme.caption_stem, theme.columns, cells);
}

SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& options) {
    if (options.tables == 0) throw InputError("synthetic corpus needs at least one table");
    Rng rng(options.seed);
    SyntheticCorpus out;
    std::size_t n_val = static_cast<std::size_t>(static_cast<double>(options.tables) * options.validation_fraction);
    std::size_t n_test = static_cast<std::size_t>(static_cast<double>(options.tables) * options.test_fraction);
    if (n_val + n_test >= options.tables) throw InputError("synthetic split leaves no training tables");
    std::size_t n_train = options.tables - n_val - n_test;
    for (std::size_t i = 0; i < options.tables; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "syn%03zu", i);
        Table table = synthetic_table(id, rng);
        Corpus& split = i < n_train ? out.train : (i < n_train + n_val ? out.validation : out.test);
        std::size_t made = 0;
        for (auto topic : kLogicTypes) {
            try {
                LfNode lf = sample_lf(table, topic, rng(), 6);
                split.instances.push_back({topic, table.id(), print_lf(lf), realize_template(lf, table)});
                ++made;
            } catch (const SamplingExhausted&) {
            }
        }
        if (made > 0) split.tables.emplace(table.id(), table);
        out.tables.emplace(table.id(), std::move(table));
    }
    return out;
}

}  // namespace logicloom
