#include <arpa/inet.h>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <thread>

#include "logicloom/error.hpp"
#include "logicloom/model.hpp"

namespace logicloom {

namespace {

std::string errno_text() { return std::strerror(errno); }

void ignore_sigpipe() {
    static const bool done = [] {
        std::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)done;
}

}  // namespace

FdChannel::FdChannel(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) { ignore_sigpipe(); }

FdChannel::~FdChannel() {
    close_write();
    if (read_fd_ >= 0) ::close(read_fd_);
}

void FdChannel::close_write() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (write_fd_ == read_fd_ && write_fd_ >= 0) ::shutdown(write_fd_, SHUT_WR);
    write_fd_ = -1;
}

void FdChannel::write_line(std::string_view line) {
    if (write_fd_ < 0) throw ModelError("channel is closed for writing");
    std::string data(line);
    data.push_back('\n');
    std::size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ModelError("write failed: " + errno_text());
        }
        off += static_cast<std::size_t>(n);
    }
}

std::optional<std::string> FdChannel::read_line(std::chrono::milliseconds timeout) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        if (eof_) {
            if (buffer_.empty()) return std::nullopt;
            std::string rest;
            rest.swap(buffer_);
            return rest;
        }
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) throw ModelError("timed out after " + std::to_string(timeout.count()) + " ms");
        pollfd p{read_fd_, POLLIN, 0};
        int r = ::poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
        if (r < 0) {
            if (errno == EINTR) continue;
            throw ModelError("poll failed: " + errno_text());
        }
        if (r == 0) continue;
        char chunk[65536];
        ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            throw ModelError("read failed: " + errno_text());
        }
        if (n == 0) {
            eof_ = true;
            continue;
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

ChildProcess::ChildProcess(const std::string& command) {
    ignore_sigpipe();
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0) throw ModelError("pipe failed: " + errno_text());
    if (::pipe(from_child) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw ModelError("pipe failed: " + errno_text());
    }
    pid_ = ::fork();
    if (pid_ < 0) throw ModelError("fork failed: " + errno_text());
    if (pid_ == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::close(to_child[0]);
        ::close(to_child[1]);
        ::close(from_child[0]);
        ::close(from_child[1]);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    ::fcntl(to_child[1], F_SETFD, FD_CLOEXEC);
    ::fcntl(from_child[0], F_SETFD, FD_CLOEXEC);
    channel_ = std::make_unique<FdChannel>(from_child[0], to_child[1]);
}

ChildProcess::~ChildProcess() {
    channel_.reset();  // closes stdin so a well-behaved server exits
    if (pid_ <= 0) return;
    for (int i = 0; i < 50; ++i) {
        int status = 0;
        pid_t r = ::waitpid(pid_, &status, WNOHANG);
        if (r == pid_ || r < 0) return;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    int status = 0;
    ::waitpid(pid_, &status, 0);
}

std::unique_ptr<FdChannel> connect_tcp(const std::string& host, int port) {
    ignore_sigpipe();
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res);
    if (rc != 0) throw ModelError("cannot resolve " + host + ": " + ::gai_strerror(rc));
    int fd = -1;
    for (addrinfo* a = res; a; a = a->ai_next) {
        fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw ModelError("cannot connect to " + host + ":" + std::to_string(port));
    return std::make_unique<FdChannel>(fd, fd);
}

std::pair<int, int> listen_tcp(const std::string& host, int port) {
    int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) throw ModelError("socket failed: " + errno_text());
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw InputError("listen address must be an IPv4 literal: " + host);
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 4) != 0) {
        std::string msg = errno_text();
        ::close(fd);
        throw ModelError("cannot listen on " + host + ":" + std::to_string(port) + ": " + msg);
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    return {fd, ntohs(addr.sin_port)};
}

std::unique_ptr<FdChannel> accept_tcp(int listen_fd) {
    int fd = ::accept4(listen_fd, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) throw ModelError("accept failed: " + errno_text());
    return std::make_unique<FdChannel>(fd, fd);
}

ExternalModel::ExternalModel(std::unique_ptr<LineChannel> channel, std::chrono::milliseconds timeout)
    : owned_(std::move(channel)), channel_(owned_.get()), timeout_(timeout) {
    handshake();
}

void ExternalModel::handshake() {
    auto r = call({{"op", "hello"}});
    if (!r.contains("version") || r["version"] != kProtocolVersion) {
        throw ModelError("protocol version mismatch: expected " + std::to_string(kProtocolVersion) + ", got " +
                         (r.contains("version") ? r["version"].dump() : std::string("none")));
    }
}

std::unique_ptr<ExternalModel> ExternalModel::launch(const std::string& descriptor, std::chrono::milliseconds timeout) {
    if (descriptor.starts_with("tcp://")) {
        std::string rest = descriptor.substr(6);
        auto colon = rest.rfind(':');
        if (colon == std::string::npos) throw InputError("endpoint needs host:port: " + descriptor);
        int port = 0;
        try {
            port = std::stoi(rest.substr(colon + 1));
        } catch (const std::exception&) {
            throw InputError("bad port in endpoint " + descriptor);
        }
        return std::make_unique<ExternalModel>(connect_tcp(rest.substr(0, colon), port), timeout);
    }
    std::unique_ptr<ExternalModel> m(new ExternalModel());
    m->process_ = std::make_unique<ChildProcess>(descriptor);
    m->channel_ = &m->process_->channel();
    m->timeout_ = timeout;
    m->handshake();
    return m;
}

ExternalModel::~ExternalModel() = default;

nlohmann::json ExternalModel::call(nlohmann::json request) {
    std::int64_t id = next_id_++;
    request["id"] = id;
    std::string op = request.value("op", "");
    channel_->write_line(request.dump());
    auto line = channel_->read_line(timeout_);
    if (!line) throw ModelError(op + ": model closed the connection");
    nlohmann::json r;
    try {
        r = nlohmann::json::parse(*line);
    } catch (const nlohmann::json::parse_error&) {
        throw ModelError(op + ": malformed response (not JSON): " + line->substr(0, 200));
    }
    if (!r.is_object()) throw ModelError(op + ": malformed response (not an object)");
    if (!r.contains("id") || !r["id"].is_number_integer() || r["id"].get<std::int64_t>() != id) {
        throw ModelError(op + ": response id does not match request id " + std::to_string(id));
    }
    if (!r.contains("ok") || !r["ok"].is_boolean()) throw ModelError(op + ": malformed response (missing ok)");
    if (!r["ok"].get<bool>()) {
        std::string err = r.contains("error") && r["error"].is_string() ? r["error"].get<std::string>() : "unknown";
        throw ModelError(op + " failed: " + err);
    }
    return r;
}

double ExternalModel::train_weighted(std::span<const WeightedPair> pairs) {
    check_pairs(pairs);
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : pairs) arr.push_back({{"source", to_wire(p.source)}, {"target", to_wire(p.target)}, {"weight", p.weight}});
    auto r = call({{"op", "train"}, {"pairs", std::move(arr)}});
    if (!r.contains("loss") || !r["loss"].is_number()) throw ModelError("train: malformed response (missing loss)");
    return r["loss"].get<double>();
}

std::vector<Tokens> ExternalModel::generate(std::span<const Tokens> inputs, int beam_size) {
    if (beam_size < 1) throw InputError("beam size must be at least 1");
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& in : inputs) arr.push_back(to_wire(in));
    auto r = call({{"op", "generate"}, {"inputs", std::move(arr)}, {"beam_size", beam_size}});
    if (!r.contains("outputs") || !r["outputs"].is_array()) throw ModelError("generate: malformed response (missing outputs)");
    const auto& outs = r["outputs"];
    if (outs.size() != inputs.size()) {
        throw ModelError("generate: expected " + std::to_string(inputs.size()) + " outputs, got " +
                         std::to_string(outs.size()));
    }
    std::vector<Tokens> result;
    result.reserve(outs.size());
    for (const auto& o : outs) {
        if (!o.is_string()) throw ModelError("generate: malformed response (non-string output)");
        result.push_back(from_wire(o.get<std::string>()));
    }
    return result;
}

void ExternalModel::save(const std::filesystem::path& path) { call({{"op", "save"}, {"path", path.string()}}); }

void ExternalModel::load(const std::filesystem::path& path) { call({{"op", "load"}, {"path", path.string()}}); }

void serve_model(GenerativeModel& model, LineChannel& channel) {
    for (;;) {
        std::optional<std::string> line;
        try {
            line = channel.read_line(std::chrono::hours(24 * 365));
        } catch (const ModelError&) {
            return;
        }
        if (!line) return;
        if (trim(*line).empty()) continue;
        nlohmann::json response;
        nlohmann::json id = nullptr;
        try {
            auto req = nlohmann::json::parse(*line);
            if (!req.is_object()) throw InputError("request is not a JSON object");
            if (req.contains("id")) id = req["id"];
            std::string op = req.at("op").get<std::string>();
            response = {{"id", id}, {"ok", true}};
            if (op == "hello") {
                response["version"] = kProtocolVersion;
            } else if (op == "train") {
                std::vector<WeightedPair> pairs;
                for (const auto& p : req.at("pairs")) {
                    pairs.push_back({from_wire(p.at("source").get<std::string>()),
                                     from_wire(p.at("target").get<std::string>()), p.at("weight").get<double>()});
                }
                response["loss"] = model.train_weighted(pairs);
            } else if (op == "generate") {
                std::vector<Tokens> inputs;
                for (const auto& s : req.at("inputs")) inputs.push_back(from_wire(s.get<std::string>()));
                auto outs = model.generate(inputs, req.value("beam_size", 1));
                nlohmann::json arr = nlohmann::json::array();
                for (const auto& o : outs) arr.push_back(to_wire(o));
                response["outputs"] = std::move(arr);
            } else if (op == "save") {
                model.save(req.at("path").get<std::string>());
            } else if (op == "load") {
                model.load(req.at("path").get<std::string>());
            } else {
                throw InputError("unknown op '" + op + "'");
            }
        } catch (const std::exception& e) {
            response = {{"id", id}, {"ok", false}, {"error", e.what()}};
        }
        try {
            channel.write_line(response.dump());
        } catch (const ModelError&) {
            return;
        }
    }
}

}  // namespace logicloom
