#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "logicloom/table.hpp"
#include "logicloom/text.hpp"

namespace logicloom {

enum class Role { l2t, lg, d2l, d2t };

std::string_view to_string(Role role);
Role role_from_string(std::string_view name);

inline constexpr std::string_view kTypeMarker = "<type>";
inline constexpr std::string_view kCaptionMarker = "<caption>";
inline constexpr std::string_view kHeadersMarker = "<headers>";
inline constexpr std::string_view kContentMarker = "<content>";
inline constexpr std::string_view kLfMarker = "<lf>";
inline constexpr std::string_view kTextMarker = "<text>";
inline constexpr std::string_view kCellDelimiter = "<cell>";
inline constexpr std::string_view kRowDelimiter = "<row>";

struct SerializeBudget {
    std::size_t total = 800;
    std::size_t content = 400;
    std::size_t lf = 200;
    std::size_t text = 50;
};

enum class Segment : std::size_t { type, caption, headers, content, payload };

struct SerializedInput {
    Tokens tokens;
    /// Tokens per segment, segment markers excluded.
    std::array<std::size_t, 5> segment_lengths{};
    /// Tokens dropped by truncation across all segments.
    std::size_t truncated = 0;

    std::size_t segment(Segment s) const { return segment_lengths[static_cast<std::size_t>(s)]; }
};

/// Linearizes (logic type, caption, headers, content, payload) with a marker
/// token before each segment. The payload is an LF for L2T, a text for LG and
/// must be absent for D2L/D2T (InputError otherwise).
SerializedInput serialize_input(Role role, LogicType type, const Table& table, std::optional<std::string_view> payload,
                                const Tokenizer& tokenizer, const SerializeBudget& budget = {});
SerializedInput serialize_input(Role role, LogicType type, const Table& table,
                                std::optional<std::string_view> payload = std::nullopt);

struct WeightedPair {
    Tokens source;
    Tokens target;
    double weight = 1.0;
};

/// Throws InputError when a weight is outside [0, 1] or a target is empty.
void check_pairs(std::span<const WeightedPair> pairs);

class GenerativeModel {
public:
    virtual ~GenerativeModel() = default;
    /// Returns the model's training loss for the batch.
    virtual double train_weighted(std::span<const WeightedPair> pairs) = 0;
    /// One top-1 output per input.
    virtual std::vector<Tokens> generate(std::span<const Tokens> inputs, int beam_size) = 0;
    virtual void save(const std::filesystem::path& path) = 0;
    virtual void load(const std::filesystem::path& path) = 0;
};

/// Deterministic stand-in: remembers every pair and answers with the stored
/// target whose source maximizes weight x Jaccard(token sets). Ties go to the
/// earliest stored pair; a best score of 0 yields an empty output.
class RetrievalModel final : public GenerativeModel {
public:
    double train_weighted(std::span<const WeightedPair> pairs) override;
    std::vector<Tokens> generate(std::span<const Tokens> inputs, int beam_size) override;
    void save(const std::filesystem::path& path) override;
    void load(const std::filesystem::path& path) override;

    std::size_t size() const { return entries_.size(); }

private:
    struct Entry {
        Tokens source;
        Tokens target;
        double weight = 0;
        std::vector<std::uint32_t> ids;  // sorted, unique
    };

    std::vector<std::uint32_t> intern(const Tokens& tokens, bool grow);
    void add(const WeightedPair& pair);
    void clear();

    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::uint32_t> vocab_;
    std::vector<std::vector<std::uint32_t>> postings_;  // token id -> entry indices
    std::map<std::pair<Tokens, Tokens>, std::size_t> by_pair_;
};

/// Tokens -> space-joined string and back, as exchanged with external models.
std::string to_wire(const Tokens& tokens);
Tokens from_wire(std::string_view text);

/// A bidirectional newline-delimited channel.
class LineChannel {
public:
    virtual ~LineChannel() = default;
    virtual void write_line(std::string_view line) = 0;
    /// nullopt at end of stream. Throws ModelError on timeout.
    virtual std::optional<std::string> read_line(std::chrono::milliseconds timeout) = 0;
};

/// Channel over a pair of file descriptors (owned, closed on destruction).
class FdChannel : public LineChannel {
public:
    FdChannel(int read_fd, int write_fd);
    ~FdChannel() override;
    FdChannel(const FdChannel&) = delete;
    FdChannel& operator=(const FdChannel&) = delete;

    void write_line(std::string_view line) override;
    std::optional<std::string> read_line(std::chrono::milliseconds timeout) override;
    void close_write();

private:
    int read_fd_;
    int write_fd_;
    std::string buffer_;
    bool eof_ = false;
};

/// Launches `command` through /bin/sh with its stdio connected to a channel.
class ChildProcess {
public:
    explicit ChildProcess(const std::string& command);
    ~ChildProcess();
    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;

    LineChannel& channel() { return *channel_; }

private:
    int pid_ = -1;
    std::unique_ptr<FdChannel> channel_;
};

std::unique_ptr<FdChannel> connect_tcp(const std::string& host, int port);
/// Listening socket on host:port (port 0 picks one); returns {fd, port}.
std::pair<int, int> listen_tcp(const std::string& host, int port);
std::unique_ptr<FdChannel> accept_tcp(int listen_fd);

/// Client side of the wire protocol. Every failure is a ModelError.
class ExternalModel final : public GenerativeModel {
public:
    /// Takes ownership of a connected channel and performs the hello handshake.
    ExternalModel(std::unique_ptr<LineChannel> channel, std::chrono::milliseconds timeout);
    /// `tcp://host:port` connects; anything else is run as a shell command.
    static std::unique_ptr<ExternalModel> launch(const std::string& descriptor,
                                                 std::chrono::milliseconds timeout = std::chrono::minutes(10));
    ~ExternalModel() override;

    double train_weighted(std::span<const WeightedPair> pairs) override;
    std::vector<Tokens> generate(std::span<const Tokens> inputs, int beam_size) override;
    void save(const std::filesystem::path& path) override;
    void load(const std::filesystem::path& path) override;

private:
    ExternalModel() = default;
    void handshake();
    nlohmann::json call(nlohmann::json request);

    std::unique_ptr<ChildProcess> process_;
    std::unique_ptr<LineChannel> owned_;
    LineChannel* channel_ = nullptr;
    std::chrono::milliseconds timeout_{0};
    std::int64_t next_id_ = 1;
};

inline constexpr int kProtocolVersion = 1;

/// Answers protocol requests on `channel` until end of stream. Malformed
/// requests get {"ok":false} responses; the loop never throws on bad input.
void serve_model(GenerativeModel& model, LineChannel& channel);

/// Generates `chunk_size` inputs per call. A failed call is retried one input
/// at a time; inputs that still fail are nullopt and noted in `warnings`.
std::vector<std::optional<Tokens>> generate_chunked(GenerativeModel& model, const std::vector<Tokens>& inputs,
                                                    int beam_size, std::size_t chunk_size = 256,
                                                    std::vector<std::string>* warnings = nullptr,
                                                    std::string_view what = "generate");

/// Model descriptors: "retrieval" (built-in), "tcp://host:port", or
/// "cmd:<shell command>".
std::unique_ptr<GenerativeModel> make_model(const std::string& descriptor,
                                            std::chrono::milliseconds timeout = std::chrono::minutes(10));

/// Copies the student's behavior into the teacher through a checkpoint under
/// `scratch_dir` (a fresh temporary directory when empty).
void sync_teacher(GenerativeModel& student, GenerativeModel& teacher, const std::filesystem::path& scratch_dir = {});

}  // namespace logicloom
