#include "depthbench/bench.hpp"

#include "depthbench/error.hpp"

#include "json.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <iostream>
#include <mutex>
#include <numeric>
#include <optional>

namespace depthbench {

TimingReport summarize_timings(std::vector<double> per_run_ms, std::size_t warmup_runs) {
    if (per_run_ms.empty()) {
        throw Error(ErrorCode::InvalidArgument, "no measured runs");
    }
    TimingReport r;
    r.warmup_runs = warmup_runs;
    r.measured_runs = per_run_ms.size();
    r.per_run_ms = std::move(per_run_ms);

    const double n = static_cast<double>(r.measured_runs);
    r.mean_ms = std::accumulate(r.per_run_ms.begin(), r.per_run_ms.end(), 0.0) / n;
    double sq = 0.0;
    for (double v : r.per_run_ms) {
        sq += (v - r.mean_ms) * (v - r.mean_ms);
    }
    r.stddev_ms = std::sqrt(sq / n);

    std::vector<double> sorted = r.per_run_ms;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    r.median_ms = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    return r;
}

std::string to_json(const TimingReport& report) {
    nlohmann::ordered_json j;
    j["warmup_runs"] = report.warmup_runs;
    j["measured_runs"] = report.measured_runs;
    j["per_run_ms"] = report.per_run_ms;
    j["median_ms"] = report.median_ms;
    j["mean_ms"] = report.mean_ms;
    j["stddev_ms"] = report.stddev_ms;
    return j.dump(2);
}

TimingReport timing_report_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    TimingReport r;
    r.warmup_runs = j.at("warmup_runs").get<std::size_t>();
    r.measured_runs = j.at("measured_runs").get<std::size_t>();
    r.per_run_ms = j.at("per_run_ms").get<std::vector<double>>();
    r.median_ms = j.at("median_ms").get<double>();
    r.mean_ms = j.at("mean_ms").get<double>();
    r.stddev_ms = j.at("stddev_ms").get<double>();
    return r;
}

namespace {

using Clock = std::chrono::steady_clock;
constexpr std::size_t kStderrCap = 64 * 1024;

void close_fd(int& fd) {
    if (fd >= 0) {
        ::close(fd);
        fd = -1;
    }
}

} // namespace

class RunnerHandle::Impl {
public:
    virtual ~Impl() = default;
    virtual RunnerKind kind() const = 0;
    virtual bool ready() const = 0;
    virtual long pid() const { return -1; }
    virtual void prepare(const RgbImage&) {}
    virtual void verify() {}
    /// One inference; returns once the model has acknowledged completion.
    virtual void infer(const RgbImage& input, std::chrono::milliseconds timeout) = 0;
};

namespace {

class InProcessRunner final : public RunnerHandle::Impl {
public:
    explicit InProcessRunner(RunnerHandle::InProcessFn fn) : fn_(std::move(fn)) {}

    RunnerKind kind() const override { return RunnerKind::InProcess; }
    bool ready() const override { return static_cast<bool>(fn_); }
    void infer(const RgbImage& input, std::chrono::milliseconds) override { fn_(input); }

private:
    RunnerHandle::InProcessFn fn_;
};

class ScratchDir {
public:
    ScratchDir() {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("depthbench-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

class ExternalRunner final : public RunnerHandle::Impl {
public:
    ExternalRunner(const std::vector<std::string>& command, const std::filesystem::path& workdir,
                   std::chrono::milliseconds handshake_timeout) {
        start(command, workdir);
        try {
            handshake(handshake_timeout);
        } catch (...) {
            shutdown();
            throw;
        }
    }

    void handshake(std::chrono::milliseconds handshake_timeout) {
        const Clock::time_point deadline = Clock::now() + handshake_timeout;
        std::optional<std::string> hello;
        try {
            hello = read_line(deadline);
        } catch (const RunnerCrashed& e) {
            throw Error(ErrorCode::BadHandshake, "runner exited before handshake: " + e.stderr_text());
        }
        if (!hello) {
            throw Error(ErrorCode::HandshakeTimeout, "no handshake within " +
                                                         std::to_string(handshake_timeout.count()) + " ms");
        }
        if (*hello != kRunnerHello) {
            throw Error(ErrorCode::BadHandshake, "unexpected handshake \"" + hello->substr(0, 80) + "\"");
        }
        ready_ = true;
    }

    ~ExternalRunner() override { shutdown(); }

    RunnerKind kind() const override { return RunnerKind::External; }
    bool ready() const override { return ready_; }
    long pid() const override { return static_cast<long>(pid_); }

    void prepare(const RgbImage& input) override {
        scratch_ = std::make_unique<ScratchDir>();
        input_path_ = scratch_->path() / "input.png";
        output_path_ = scratch_->path() / "output.png";
        save_rgb_png(input_path_, input);
    }

    void infer(const RgbImage&, std::chrono::milliseconds timeout) override {
        if (!scratch_) {
            throw Error(ErrorCode::InvalidArgument, "runner not prepared");
        }
        const std::string request = "INFER " + input_path_.string() + " " + output_path_.string() + "\n";
        write_all(request);
        const auto reply = read_line(Clock::now() + timeout);
        if (!reply) {
            throw Error(ErrorCode::InferenceTimeout, "no reply within " + std::to_string(timeout.count()) + " ms");
        }
        if (*reply == "OK") {
            return;
        }
        if (reply->rfind("ERR", 0) == 0) {
            throw Error(ErrorCode::RunnerError, reply->size() > 4 ? reply->substr(4) : std::string("(no message)"));
        }
        throw Error(ErrorCode::RunnerError, "unexpected reply \"" + reply->substr(0, 80) + "\"");
    }

    void verify() override {
        std::error_code ec;
        if (!std::filesystem::is_regular_file(output_path_, ec)) {
            throw Error(ErrorCode::RunnerError, "runner acknowledged but wrote no output PNG");
        }
    }

private:
    void start(const std::vector<std::string>& command, const std::filesystem::path& workdir) {
        if (command.empty() || command.front().empty()) {
            throw Error(ErrorCode::SpawnFailure, "empty command");
        }
        int in_pair[2];   // socketpair so writes can use MSG_NOSIGNAL
        int out_pipe[2];
        int err_pipe[2];
        int exec_pipe[2];  // reports exec failure back to the parent
        if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, in_pair) != 0) {
            throw Error(ErrorCode::SpawnFailure, std::strerror(errno));
        }
        if (::pipe2(out_pipe, O_CLOEXEC) != 0 || ::pipe2(err_pipe, O_CLOEXEC) != 0 ||
            ::pipe2(exec_pipe, O_CLOEXEC) != 0) {
            throw Error(ErrorCode::SpawnFailure, std::strerror(errno));
        }

        std::vector<std::string> args = command;
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        argv.push_back(nullptr);
        const std::string dir = workdir.string();

        pid_ = ::fork();
        if (pid_ < 0) {
            throw Error(ErrorCode::SpawnFailure, std::strerror(errno));
        }
        if (pid_ == 0) {
            ::dup2(in_pair[1], STDIN_FILENO);
            ::dup2(out_pipe[1], STDOUT_FILENO);
            ::dup2(err_pipe[1], STDERR_FILENO);
            int err = 0;
            if (!dir.empty() && ::chdir(dir.c_str()) != 0) {
                err = errno;
            } else {
                ::execvp(argv[0], argv.data());
                err = errno;
            }
            [[maybe_unused]] auto n = ::write(exec_pipe[1], &err, sizeof(err));
            ::_exit(127);
        }

        ::close(in_pair[1]);
        ::close(out_pipe[1]);
        ::close(err_pipe[1]);
        ::close(exec_pipe[1]);
        stdin_fd_ = in_pair[0];
        stdout_fd_ = out_pipe[0];
        stderr_fd_ = err_pipe[0];

        int child_errno = 0;
        ssize_t n;
        do {
            n = ::read(exec_pipe[0], &child_errno, sizeof(child_errno));
        } while (n < 0 && errno == EINTR);
        ::close(exec_pipe[0]);
        if (n > 0) {
            ::waitpid(pid_, nullptr, 0);
            pid_ = -1;
            close_fd(stdin_fd_);
            close_fd(stdout_fd_);
            close_fd(stderr_fd_);
            throw Error(ErrorCode::SpawnFailure, command.front() + ": " + std::strerror(child_errno));
        }
    }

    void write_all(const std::string& data) {
        std::size_t off = 0;
        while (off < data.size()) {
            const ssize_t n = ::send(stdin_fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                crashed("runner closed its input");
            }
            off += static_cast<std::size_t>(n);
        }
    }

    void drain_stderr(int timeout_ms) {
        while (stderr_fd_ >= 0) {
            pollfd p{stderr_fd_, POLLIN, 0};
            const int r = ::poll(&p, 1, timeout_ms);
            if (r <= 0) return;
            char buf[4096];
            const ssize_t n = ::read(stderr_fd_, buf, sizeof(buf));
            if (n <= 0) {
                close_fd(stderr_fd_);
                return;
            }
            if (stderr_.size() < kStderrCap) {
                stderr_.append(buf, static_cast<std::size_t>(n));
            }
        }
    }

    [[noreturn]] void crashed(const std::string& what) {
        int status = 0;
        std::string detail = what;
        if (pid_ > 0 && ::waitpid(pid_, &status, 0) == pid_) {
            pid_ = -1;
            if (WIFEXITED(status)) {
                detail += " (exit status " + std::to_string(WEXITSTATUS(status)) + ")";
            } else if (WIFSIGNALED(status)) {
                detail += " (signal " + std::to_string(WTERMSIG(status)) + ")";
            }
        }
        drain_stderr(1000);
        ready_ = false;
        throw RunnerCrashed(detail, stderr_);
    }

    // Next stdout line, or nullopt on timeout. Stderr is collected meanwhile
    // so a chatty runner cannot block on a full pipe.
    std::optional<std::string> read_line(Clock::time_point deadline) {
        for (;;) {
            if (auto pos = line_buffer_.find('\n'); pos != std::string::npos) {
                std::string line = line_buffer_.substr(0, pos);
                line_buffer_.erase(0, pos + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            if (stdout_fd_ < 0) {
                crashed("runner exited");
            }
            const auto remaining =
                std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
            if (remaining <= 0) {
                return std::nullopt;
            }
            pollfd fds[2] = {{stdout_fd_, POLLIN, 0}, {stderr_fd_, POLLIN, 0}};
            const int r = ::poll(fds, stderr_fd_ >= 0 ? 2 : 1, static_cast<int>(std::min<long long>(remaining, 1000)));
            if (r < 0) {
                if (errno == EINTR) continue;
                throw Error(ErrorCode::RunnerError, std::strerror(errno));
            }
            if (stderr_fd_ >= 0 && (fds[1].revents & (POLLIN | POLLHUP))) {
                char buf[4096];
                const ssize_t n = ::read(stderr_fd_, buf, sizeof(buf));
                if (n <= 0) {
                    close_fd(stderr_fd_);
                } else if (stderr_.size() < kStderrCap) {
                    stderr_.append(buf, static_cast<std::size_t>(n));
                }
            }
            if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
                char buf[4096];
                const ssize_t n = ::read(stdout_fd_, buf, sizeof(buf));
                if (n <= 0) {
                    close_fd(stdout_fd_);
                } else {
                    line_buffer_.append(buf, static_cast<std::size_t>(n));
                }
            }
        }
    }

    void shutdown() {
        close_fd(stdin_fd_);
        if (pid_ > 0) {
            // Give a well-behaved runner a moment to exit on EOF.
            for (int i = 0; i < 50; ++i) {
                if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
                    pid_ = -1;
                    break;
                }
                ::usleep(10'000);
            }
            if (pid_ > 0) {
                ::kill(pid_, SIGKILL);
                ::waitpid(pid_, nullptr, 0);
                pid_ = -1;
            }
        }
        close_fd(stdout_fd_);
        close_fd(stderr_fd_);
    }

    pid_t pid_ = -1;
    int stdin_fd_ = -1;
    int stdout_fd_ = -1;
    int stderr_fd_ = -1;
    bool ready_ = false;
    std::string line_buffer_;
    std::string stderr_;
    std::unique_ptr<ScratchDir> scratch_;
    std::filesystem::path input_path_;
    std::filesystem::path output_path_;
};

std::mutex& measurement_lock() {
    static std::mutex m;
    return m;
}

} // namespace

RunnerHandle::RunnerHandle(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
RunnerHandle::RunnerHandle(RunnerHandle&&) noexcept = default;
RunnerHandle& RunnerHandle::operator=(RunnerHandle&&) noexcept = default;
RunnerHandle::~RunnerHandle() = default;

RunnerKind RunnerHandle::kind() const { return impl_->kind(); }
bool RunnerHandle::ready() const { return impl_ && impl_->ready(); }
long RunnerHandle::pid() const { return impl_ ? impl_->pid() : -1; }

RunnerHandle RunnerHandle::in_process(InProcessFn fn) {
    return RunnerHandle(std::make_unique<InProcessRunner>(std::move(fn)));
}

RunnerHandle spawn_runner(const std::vector<std::string>& command, const std::filesystem::path& workdir,
                          std::chrono::milliseconds handshake_timeout) {
    return RunnerHandle(std::make_unique<ExternalRunner>(command, workdir, handshake_timeout));
}

TimingReport time_model(RunnerHandle& runner, const RgbImage& input, std::size_t warmup, std::size_t runs,
                        std::chrono::milliseconds inference_timeout) {
    if (runs == 0) {
        throw Error(ErrorCode::InvalidArgument, "runs must be at least 1");
    }
    if (!runner.ready()) {
        throw Error(ErrorCode::InvalidArgument, "runner is not ready");
    }
    std::lock_guard<std::mutex> lock(measurement_lock());
    RunnerHandle::Impl& impl = *runner.impl_;
    impl.prepare(input);

    for (std::size_t i = 0; i < warmup; ++i) {
        impl.infer(input, inference_timeout);
    }
    std::vector<double> per_run;
    per_run.reserve(runs);
    for (std::size_t i = 0; i < runs; ++i) {
        const auto t0 = Clock::now();
        impl.infer(input, inference_timeout);
        const auto t1 = Clock::now();
        per_run.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    impl.verify();
    return summarize_timings(std::move(per_run), warmup);
}

int serve_runner(const std::function<void(const std::filesystem::path&, const std::filesystem::path&)>& infer) {
    std::cout << kRunnerHello << "\n" << std::flush;
    std::string line;
    while (std::getline(std::cin, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.rfind("INFER ", 0) != 0) {
            std::cout << "ERR unknown command" << "\n" << std::flush;
            continue;
        }
        const std::string args = line.substr(6);
        const auto space = args.find(' ');
        if (space == std::string::npos) {
            std::cout << "ERR expected INFER <input> <output>" << "\n" << std::flush;
            continue;
        }
        try {
            infer(args.substr(0, space), args.substr(space + 1));
            std::cout << "OK\n" << std::flush;
        } catch (const std::exception& e) {
            std::string msg = e.what();
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            std::cout << "ERR " << msg << "\n" << std::flush;
        }
    }
    return 0;
}

} // namespace depthbench
