#include "logicloom/model.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <unistd.h>

#include "logicloom/error.hpp"

namespace logicloom {

std::string_view to_string(Role role) {
    switch (role) {
        case Role::l2t: return "L2T";
        case Role::lg: return "LG";
        case Role::d2l: return "D2L";
        case Role::d2t: return "D2T";
    }
    return "?";
}

Role role_from_string(std::string_view name) {
    std::string n = to_lower(name);
    if (n == "l2t") return Role::l2t;
    if (n == "lg") return Role::lg;
    if (n == "d2l") return Role::d2l;
    if (n == "d2t") return Role::d2t;
    throw InputError("unknown role '" + std::string(name) + "'");
}

namespace {

// Keeps at most `limit` tokens and returns how many were dropped.
std::size_t truncate(Tokens& tokens, std::size_t limit) {
    if (tokens.size() <= limit) return 0;
    std::size_t dropped = tokens.size() - limit;
    tokens.resize(limit);
    return dropped;
}

void append(Tokens& out, const Tokens& more) { out.insert(out.end(), more.begin(), more.end()); }

}  // namespace

SerializedInput serialize_input(Role role, LogicType type, const Table& table, std::optional<std::string_view> payload,
                                const Tokenizer& tokenizer, const SerializeBudget& budget) {
    bool wants_payload = role == Role::l2t || role == Role::lg;
    if (wants_payload && !payload) throw InputError(std::string(to_string(role)) + " input needs a payload");
    if (!wants_payload && payload) throw InputError(std::string(to_string(role)) + " input takes no payload");

    SerializedInput out;
    Tokens type_tokens = {std::string(to_string(type))};

    Tokens payload_tokens;
    if (payload) {
        payload_tokens = tokenizer.tokenize(*payload);
        out.truncated += truncate(payload_tokens, role == Role::l2t ? budget.lf : budget.text);
    }

    Tokens content;
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        if (r > 0) content.emplace_back(kRowDelimiter);
        for (std::size_t c = 0; c < table.column_count(); ++c) {
            if (c > 0) content.emplace_back(kCellDelimiter);
            append(content, tokenizer.tokenize(table.cell(r, c).raw));
        }
    }
    out.truncated += truncate(content, budget.content);

    Tokens headers;
    for (std::size_t c = 0; c < table.column_count(); ++c) {
        if (c > 0) headers.emplace_back(kCellDelimiter);
        append(headers, tokenizer.tokenize(table.columns()[c]));
    }
    Tokens caption = tokenizer.tokenize(table.caption());

    // Headers and then the caption take whatever the other segments leave.
    std::size_t markers = payload ? 5 : 4;
    std::size_t fixed = markers + type_tokens.size() + content.size() + payload_tokens.size();
    std::size_t room = budget.total > fixed ? budget.total - fixed : 0;
    out.truncated += truncate(headers, room);
    room -= headers.size();
    out.truncated += truncate(caption, room);

    auto emit = [&](std::string_view marker, const Tokens& seg, Segment s) {
        out.tokens.emplace_back(marker);
        append(out.tokens, seg);
        out.segment_lengths[static_cast<std::size_t>(s)] = seg.size();
    };
    emit(kTypeMarker, type_tokens, Segment::type);
    emit(kCaptionMarker, caption, Segment::caption);
    emit(kHeadersMarker, headers, Segment::headers);
    emit(kContentMarker, content, Segment::content);
    if (payload) emit(role == Role::l2t ? kLfMarker : kTextMarker, payload_tokens, Segment::payload);
    return out;
}

SerializedInput serialize_input(Role role, LogicType type, const Table& table, std::optional<std::string_view> payload) {
    static const WhitespaceTokenizer tokenizer;
    return serialize_input(role, type, table, payload, tokenizer);
}

void check_pairs(std::span<const WeightedPair> pairs) {
    for (const auto& p : pairs) {
        if (!(p.weight >= 0.0 && p.weight <= 1.0)) {
            throw InputError("pair weight " + std::to_string(p.weight) + " is outside [0, 1]");
        }
        if (p.target.empty()) throw InputError("pair target is empty");
    }
}

std::string to_wire(const Tokens& tokens) { return join(tokens, " "); }
Tokens from_wire(std::string_view text) { return split_whitespace(text); }

std::vector<std::uint32_t> RetrievalModel::intern(const Tokens& tokens, bool grow) {
    std::vector<std::uint32_t> ids;
    ids.reserve(tokens.size());
    // Unknown tokens of a query get ids past the vocabulary so they still
    // count toward the union.
    std::uint32_t fresh = static_cast<std::uint32_t>(vocab_.size());
    std::unordered_map<std::string, std::uint32_t> local;
    for (const auto& t : tokens) {
        auto it = vocab_.find(t);
        if (it != vocab_.end()) {
            ids.push_back(it->second);
        } else if (grow) {
            auto id = static_cast<std::uint32_t>(vocab_.size());
            vocab_.emplace(t, id);
            postings_.emplace_back();
            ids.push_back(id);
        } else {
            auto [l, inserted] = local.emplace(t, fresh);
            if (inserted) ++fresh;
            ids.push_back(l->second);
        }
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

void RetrievalModel::add(const WeightedPair& pair) {
    auto key = std::make_pair(pair.source, pair.target);
    if (auto it = by_pair_.find(key); it != by_pair_.end()) {
        Entry& e = entries_[it->second];
        e.weight = std::max(e.weight, pair.weight);
        return;
    }
    Entry e{pair.source, pair.target, pair.weight, intern(pair.source, true)};
    auto index = static_cast<std::uint32_t>(entries_.size());
    for (auto id : e.ids) postings_[id].push_back(index);
    by_pair_.emplace(std::move(key), entries_.size());
    entries_.push_back(std::move(e));
}

double RetrievalModel::train_weighted(std::span<const WeightedPair> pairs) {
    check_pairs(pairs);
    for (const auto& p : pairs) add(p);
    return 0.0;
}

std::vector<Tokens> RetrievalModel::generate(std::span<const Tokens> inputs, int beam_size) {
    if (beam_size < 1) throw InputError("beam size must be at least 1");
    std::vector<Tokens> out;
    out.reserve(inputs.size());
    std::vector<std::uint32_t> overlap(entries_.size());
    std::vector<std::uint32_t> touched;
    for (const auto& input : inputs) {
        auto ids = intern(input, false);
        touched.clear();
        for (auto id : ids) {
            if (id >= postings_.size()) continue;
            for (auto e : postings_[id]) {
                if (overlap[e]++ == 0) touched.push_back(e);
            }
        }
        std::sort(touched.begin(), touched.end());
        double best = 0.0;
        std::size_t best_index = entries_.size();
        for (auto e : touched) {
            double inter = overlap[e];
            double uni = static_cast<double>(ids.size() + entries_[e].ids.size()) - inter;
            double score = entries_[e].weight * inter / uni;
            if (score > best) {
                best = score;
                best_index = e;
            }
            overlap[e] = 0;
        }
        out.push_back(best_index < entries_.size() ? entries_[best_index].target : Tokens{});
    }
    return out;
}

void RetrievalModel::clear() {
    entries_.clear();
    vocab_.clear();
    postings_.clear();
    by_pair_.clear();
}

void RetrievalModel::save(const std::filesystem::path& path) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : entries_) entries.push_back({{"source", e.source}, {"target", e.target}, {"weight", e.weight}});
    nlohmann::json doc = {{"model", "retrieval"}, {"schema_version", 1}, {"entries", std::move(entries)}};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw ModelError("cannot write checkpoint " + path.string());
    os << doc.dump() << "\n";
    if (!os) throw ModelError("failed writing checkpoint " + path.string());
}

void RetrievalModel::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ModelError("cannot read checkpoint " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(is);
        if (doc.at("model") != "retrieval") throw ModelError("checkpoint " + path.string() + " is not a retrieval model");
        std::vector<WeightedPair> pairs;
        for (const auto& e : doc.at("entries")) {
            pairs.push_back({e.at("source").get<Tokens>(), e.at("target").get<Tokens>(), e.at("weight").get<double>()});
        }
        clear();
        for (const auto& p : pairs) add(p);
    } catch (const nlohmann::json::exception& e) {
        throw ModelError("corrupt checkpoint " + path.string() + ": " + e.what());
    }
}

std::vector<std::optional<Tokens>> generate_chunked(GenerativeModel& model, const std::vector<Tokens>& inputs,
                                                    int beam_size, std::size_t chunk_size,
                                                    std::vector<std::string>* warnings, std::string_view what) {
    std::vector<std::optional<Tokens>> out(inputs.size());
    std::size_t chunk = std::max<std::size_t>(1, chunk_size);
    for (std::size_t start = 0; start < inputs.size(); start += chunk) {
        std::size_t end = std::min(inputs.size(), start + chunk);
        std::span<const Tokens> slice(inputs.data() + start, end - start);
        try {
            auto res = model.generate(slice, beam_size);
            if (res.size() != slice.size()) throw ModelError("wrong number of outputs");
            for (std::size_t i = 0; i < res.size(); ++i) out[start + i] = std::move(res[i]);
            continue;
        } catch (const ModelError&) {
        }
        for (std::size_t i = start; i < end; ++i) {
            try {
                auto res = model.generate(std::span<const Tokens>(&inputs[i], 1), beam_size);
                if (res.size() != 1) throw ModelError("wrong number of outputs");
                out[i] = std::move(res[0]);
            } catch (const ModelError& e) {
                if (warnings) warnings->push_back(std::string(what) + " item " + std::to_string(i) + ": " + e.what());
            }
        }
    }
    return out;
}

std::unique_ptr<GenerativeModel> make_model(const std::string& descriptor, std::chrono::milliseconds timeout) {
    if (descriptor == "retrieval" || descriptor == "builtin:retrieval") return std::make_unique<RetrievalModel>();
    if (descriptor.starts_with("tcp://")) return ExternalModel::launch(descriptor, timeout);
    if (descriptor.starts_with("cmd:")) return ExternalModel::launch(descriptor.substr(4), timeout);
    throw InputError("unknown model descriptor '" + descriptor + "' (retrieval | tcp://host:port | cmd:<command>)");
}

void sync_teacher(GenerativeModel& student, GenerativeModel& teacher, const std::filesystem::path& scratch_dir) {
    static std::atomic<unsigned> counter{0};
    std::filesystem::path dir = scratch_dir;
    bool temporary = dir.empty();
    if (temporary) {
        dir = std::filesystem::temp_directory_path() /
              ("logicloom-sync-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    }
    std::filesystem::create_directories(dir);
    std::filesystem::path checkpoint = dir / "student.ckpt";
    student.save(checkpoint);
    teacher.load(checkpoint);
    if (temporary) {
        std::error_code ec;
        std::filesystem::remove_all(dir, ec);
    }
}

}  // namespace logicloom
