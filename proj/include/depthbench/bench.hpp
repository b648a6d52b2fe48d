#pragma once

#include "depthbench/dataset_io.hpp"

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace depthbench {

inline constexpr const char* kRunnerHello = "HELLO depthbench-runner/1";
inline constexpr std::size_t kDefaultWarmupRuns = 3;
inline constexpr std::size_t kDefaultMeasuredRuns = 10;
inline constexpr std::chrono::milliseconds kHandshakeTimeout{10'000};
inline constexpr std::chrono::milliseconds kInferenceTimeout{120'000};

struct TimingReport {
    std::size_t warmup_runs = 0;
    std::size_t measured_runs = 0;
    std::vector<double> per_run_ms;
    double median_ms = 0.0;  // the scored runtime
    double mean_ms = 0.0;
    double stddev_ms = 0.0;  // population
};

/// Builds the summary statistics from raw measurements.
TimingReport summarize_timings(std::vector<double> per_run_ms, std::size_t warmup_runs);

std::string to_json(const TimingReport& report);
TimingReport timing_report_from_json(const std::string& text);

enum class RunnerKind { InProcess, External };

/// A model that can be asked to run one inference at a time. External
/// runners are child processes speaking the line protocol:
///   runner -> harness at startup: HELLO depthbench-runner/1
///   harness -> runner: INFER <input_png> <output_png>
///   runner -> harness: OK  |  ERR <message>
class RunnerHandle {
public:
    using InProcessFn = std::function<void(const RgbImage&)>;

    static RunnerHandle in_process(InProcessFn fn);

    RunnerHandle(RunnerHandle&&) noexcept;
    RunnerHandle& operator=(RunnerHandle&&) noexcept;
    ~RunnerHandle();

    RunnerKind kind() const;
    bool ready() const;
    /// Child pid for external runners, -1 otherwise.
    long pid() const;

    class Impl;

private:
    explicit RunnerHandle(std::unique_ptr<Impl> impl);
    friend RunnerHandle spawn_runner(const std::vector<std::string>&, const std::filesystem::path&,
                                     std::chrono::milliseconds);
    friend TimingReport time_model(RunnerHandle&, const RgbImage&, std::size_t, std::size_t,
                                   std::chrono::milliseconds);

    std::unique_ptr<Impl> impl_;
};

/// Starts `command` (argv form, resolved through PATH) in `workdir` and waits
/// for the handshake. Throws Error(SpawnFailure | HandshakeTimeout | BadHandshake).
RunnerHandle spawn_runner(const std::vector<std::string>& command, const std::filesystem::path& workdir = {},
                          std::chrono::milliseconds handshake_timeout = kHandshakeTimeout);

/// Runs `warmup` unmeasured inferences, then `runs` measured ones, each timed
/// from request dispatch to acknowledgment on a monotonic clock. Only one
/// measurement runs at a time process-wide. Throws RunnerCrashed (carrying
/// the child's stderr), Error(InferenceTimeout) or Error(RunnerError).
TimingReport time_model(RunnerHandle& runner, const RgbImage& input, std::size_t warmup = kDefaultWarmupRuns,
                        std::size_t runs = kDefaultMeasuredRuns,
                        std::chrono::milliseconds inference_timeout = kInferenceTimeout);

/// Serves the runner protocol on stdin/stdout with `infer` as the model.
/// Returns when stdin closes.
int serve_runner(const std::function<void(const std::filesystem::path&, const std::filesystem::path&)>& infer);

} // namespace depthbench
