#pragma once

// Out-of-process model driver. The child is any executable that speaks a
// line-oriented JSON protocol on stdin/stdout:
//
//   child -> {"ready":true}                      once, before any request
//   parent -> {"id":"...","image":"path"}         one line per sample
//   child -> {"id":"...","score":0.42}            any order, optional "mask"
//
// At most `batch` requests are in flight at a time. A child that exits
// early, stalls past the timeout, or emits an unparseable line fails the
// run with ChildExit / Timeout / ProtocolViolation.

#include <fbench/core.hpp>
#include <fbench/error.hpp>

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <deque>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace fbench {

struct ExecOptions {
    int batch = 8;            // max in-flight requests
    double timeout = 30.0;    // seconds without progress before giving up
};

namespace detail {

struct ChildProcess {
    pid_t pid = -1;
    int to_child = -1;    // write end of child's stdin
    int from_child = -1;  // read end of child's stdout

    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;

    explicit ChildProcess(const std::string& command) {
        int in_pipe[2];
        int out_pipe[2];
        if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
            throw BenchError("IoFailure", "pipe: " + std::string(std::strerror(errno)));
        pid = fork();
        if (pid < 0)
            throw BenchError("IoFailure", "fork: " + std::string(std::strerror(errno)));
        if (pid == 0) {
            dup2(in_pipe[0], STDIN_FILENO);
            dup2(out_pipe[1], STDOUT_FILENO);
            close(in_pipe[0]);
            close(in_pipe[1]);
            close(out_pipe[0]);
            close(out_pipe[1]);
            execl("/bin/sh", "sh", "-c", command.c_str(), (char*)nullptr);
            _exit(127);
        }
        close(in_pipe[0]);
        close(out_pipe[1]);
        to_child = in_pipe[1];
        from_child = out_pipe[0];
    }

    ~ChildProcess() {
        if (to_child >= 0) close(to_child);
        if (from_child >= 0) close(from_child);
        if (pid > 0) {
            int status = 0;
            if (waitpid(pid, &status, WNOHANG) == 0) {
                kill(pid, SIGKILL);
                waitpid(pid, &status, 0);
            }
        }
    }

    void close_stdin() {
        if (to_child >= 0) {
            close(to_child);
            to_child = -1;
        }
    }

    // Reaps the child and returns its exit code (128+signal if killed).
    int wait_exit() {
        int status = 0;
        waitpid(pid, &status, 0);
        pid = -1;
        if (WIFEXITED(status)) return WEXITSTATUS(status);
        if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
        return -1;
    }
};

// Reads one '\n'-terminated line from fd into `line`, buffering leftovers in
// `buf`. Returns false on EOF with nothing buffered. Throws Timeout if no
// byte arrives within deadline_ms.
class LineReader {
public:
    explicit LineReader(int fd) : fd_(fd) {}

    bool read_line(std::string& line, int timeout_ms, const std::string& timeout_what) {
        for (;;) {
            const auto pos = buf_.find('\n');
            if (pos != std::string::npos) {
                line = buf_.substr(0, pos);
                buf_.erase(0, pos + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return true;
            }
            if (eof_) {
                if (buf_.empty()) return false;
                line = std::move(buf_);
                buf_.clear();
                return true;
            }
            pollfd pfd{fd_, POLLIN, 0};
            const int rc = poll(&pfd, 1, timeout_ms);
            if (rc == 0)
                throw EvalError("Timeout", timeout_what);
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw BenchError("IoFailure", "poll: " + std::string(std::strerror(errno)));
            }
            char chunk[4096];
            const ssize_t got = read(fd_, chunk, sizeof chunk);
            if (got < 0) {
                if (errno == EINTR) continue;
                throw BenchError("IoFailure", "read: " + std::string(std::strerror(errno)));
            }
            if (got == 0)
                eof_ = true;
            else
                buf_.append(chunk, static_cast<std::size_t>(got));
        }
    }

private:
    int fd_;
    std::string buf_;
    bool eof_ = false;
};

inline void write_all(int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = write(fd, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw EvalError("ChildExit",
                            "child closed its input: " + std::string(std::strerror(errno)));
        }
        off += static_cast<std::size_t>(n);
    }
}

}  // namespace detail

// Runs `command` once and collects a prediction for every record in the
// manifest. Results are returned in manifest order regardless of the order
// the child answered in.
inline std::vector<PredictionRecord> exec_model(const std::string& command,
                                                const DatasetManifest& manifest,
                                                const ExecOptions& options = {}) {
    if (options.batch < 1)
        throw BenchError("BadBatch", "batch must be at least 1");
    const int timeout_ms = options.timeout <= 0
                               ? -1
                               : static_cast<int>(options.timeout * 1000.0);

    // SIGPIPE would kill the parent if the child dies mid-write; we want the
    // EPIPE return instead so it surfaces as ChildExit.
    signal(SIGPIPE, SIG_IGN);

    detail::ChildProcess child(command);
    detail::LineReader reader(child.from_child);
    std::size_t line_no = 0;

    auto protocol_violation = [&](const std::string& why) -> EvalError {
        return EvalError("ProtocolViolation",
                         "line " + std::to_string(line_no) + ": " + why);
    };

    std::string line;
    ++line_no;
    if (!reader.read_line(line, timeout_ms, "child produced no readiness line")) {
        child.close_stdin();
        const int code = child.wait_exit();
        throw EvalError("ChildExit",
                        "child exited with code " + std::to_string(code) +
                            " before signalling readiness");
    }
    try {
        const auto ready = nlohmann::json::parse(line);
        if (!ready.is_object() || !ready.contains("ready") ||
            ready["ready"] != true)
            throw protocol_violation("expected {\"ready\":true}, got: " + line);
    } catch (const nlohmann::json::exception&) {
        throw protocol_violation("expected {\"ready\":true}, got: " + line);
    }

    std::unordered_map<std::string, PredictionRecord> answered;
    std::deque<std::string> in_flight;  // ids, oldest first
    std::size_t next_request = 0;
    const auto& records = manifest.records;

    auto send_requests = [&] {
        while (next_request < records.size() &&
               in_flight.size() < static_cast<std::size_t>(options.batch)) {
            const auto& rec = records[next_request++];
            ordered_json req;
            req["id"] = rec.id;
            req["image"] = rec.image;
            detail::write_all(child.to_child, req.dump() + "\n");
            in_flight.push_back(rec.id);
        }
    };

    send_requests();
    while (!in_flight.empty()) {
        ++line_no;
        bool got;
        try {
            got = reader.read_line(line, timeout_ms, "");
        } catch (const EvalError& e) {
            if (std::string(e.code()) == "Timeout")
                throw EvalError("Timeout",
                                "no answer for id '" + in_flight.front() + "' within " +
                                    std::to_string(options.timeout) + "s");
            throw;
        }
        if (!got) {
            child.close_stdin();
            const int code = child.wait_exit();
            throw EvalError("ChildExit",
                            "child exited with code " + std::to_string(code) +
                                " leaving id '" + in_flight.front() + "' unanswered");
        }
        if (line.empty()) continue;
        ordered_json parsed;
        try {
            parsed = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw protocol_violation(std::string("unparseable response: ") + e.what());
        }
        PredictionRecord pred;
        try {
            pred = prediction_from_json(parsed);
        } catch (const BenchError& e) {
            throw protocol_violation(e.message());
        }
        const auto it = std::find(in_flight.begin(), in_flight.end(), pred.sample_id);
        if (it == in_flight.end()) {
            if (answered.count(pred.sample_id))
                throw protocol_violation("duplicate answer for id '" + pred.sample_id + "'");
            throw protocol_violation("answer for unknown id '" + pred.sample_id + "'");
        }
        in_flight.erase(it);
        answered.emplace(pred.sample_id, std::move(pred));
        send_requests();
    }

    child.close_stdin();
    const int code = child.wait_exit();
    if (code != 0)
        throw EvalError("ChildExit",
                        "child exited with code " + std::to_string(code) +
                            " after answering all requests");

    std::vector<PredictionRecord> out;
    out.reserve(records.size());
    for (const auto& rec : records) out.push_back(std::move(answered.at(rec.id)));
    return out;
}

}  // namespace fbench
