#include "depthbench/bench.hpp"
#include "depthbench/error.hpp"

#include "doctest.h"

#include <atomic>
#include <cmath>
#include <thread>

using namespace depthbench;
using namespace std::chrono_literals;

namespace {

const std::string kFake = DEPTHBENCH_FAKE_RUNNER;

RgbImage tiny_rgb() {
    RgbImage img;
    img.width = 4;
    img.height = 3;
    img.values.assign(4 * 3 * 3, 128);
    return img;
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected depthbench::Error");
    return ErrorCode::InvalidArgument;
}

} // namespace

TEST_CASE("timing summary") {
    const auto r = summarize_timings({3.0, 1.0, 2.0, 10.0}, 2);
    CHECK(r.warmup_runs == 2);
    CHECK(r.measured_runs == 4);
    CHECK(r.per_run_ms == std::vector<double>{3.0, 1.0, 2.0, 10.0});
    CHECK(r.median_ms == 2.5);
    CHECK(r.mean_ms == 4.0);
    CHECK(r.stddev_ms == doctest::Approx(std::sqrt((1.0 + 9.0 + 4.0 + 36.0) / 4.0)));

    const auto one = summarize_timings({7.5}, 0);
    CHECK(one.median_ms == 7.5);
    CHECK(one.mean_ms == 7.5);
    CHECK(one.stddev_ms == 0.0);

    const auto back = timing_report_from_json(to_json(r));
    CHECK(back.per_run_ms == r.per_run_ms);
    CHECK(back.median_ms == r.median_ms);
    CHECK(back.stddev_ms == r.stddev_ms);
    CHECK(back.warmup_runs == 2);
}

TEST_CASE("in-process runner sees warmup plus measured calls") {
    std::atomic<int> calls{0};
    auto runner = RunnerHandle::in_process([&](const RgbImage&) {
        ++calls;
        std::this_thread::sleep_for(2ms);
    });
    CHECK(runner.kind() == RunnerKind::InProcess);
    CHECK(runner.pid() == -1);
    const auto r = time_model(runner, tiny_rgb(), 3, 5);
    CHECK(calls == 8);
    CHECK(r.per_run_ms.size() == 5);
    CHECK(r.median_ms >= 2.0);
    CHECK(code_of([&] { time_model(runner, tiny_rgb(), 0, 0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("external runner with a fixed delay") {
    auto runner = spawn_runner({kFake, "--delay-ms", "20"});
    CHECK(runner.ready());
    CHECK(runner.kind() == RunnerKind::External);
    CHECK(runner.pid() > 0);
    const auto r = time_model(runner, tiny_rgb(), 2, 5);
    CHECK(r.warmup_runs == 2);
    CHECK(r.measured_runs == 5);
    REQUIRE(r.per_run_ms.size() == 5);
    CHECK(r.median_ms >= 20.0);
    CHECK(r.median_ms < 40.0);
    for (double t : r.per_run_ms) CHECK(t >= 20.0);

    // The runner stays usable for another measurement.
    CHECK(time_model(runner, tiny_rgb(), 0, 1).per_run_ms.size() == 1);
}

TEST_CASE("runner failures map to distinct errors") {
    CHECK(code_of([] { spawn_runner({"/nonexistent/depthbench-runner"}); }) == ErrorCode::SpawnFailure);
    CHECK(code_of([] { spawn_runner({}); }) == ErrorCode::SpawnFailure);
    CHECK(code_of([] { spawn_runner({kFake, "--bad-hello"}); }) == ErrorCode::BadHandshake);
    CHECK(code_of([] { spawn_runner({kFake, "--no-hello"}, {}, 300ms); }) == ErrorCode::HandshakeTimeout);
    CHECK(code_of([] { spawn_runner({kFake, "--unknown-flag"}); }) == ErrorCode::BadHandshake);

    {
        auto runner = spawn_runner({kFake, "--err"});
        CHECK(code_of([&] { time_model(runner, tiny_rgb(), 0, 1); }) == ErrorCode::RunnerError);
    }
    {
        auto runner = spawn_runner({kFake, "--skip-output"});
        CHECK(code_of([&] { time_model(runner, tiny_rgb(), 0, 2); }) == ErrorCode::RunnerError);
    }
    {
        auto runner = spawn_runner({kFake, "--hang-after", "1"});
        CHECK(code_of([&] { time_model(runner, tiny_rgb(), 1, 1, 200ms); }) == ErrorCode::InferenceTimeout);
    }
}

TEST_CASE("a crashing runner surfaces its stderr") {
    auto runner = spawn_runner({kFake, "--crash-after", "2"});
    try {
        time_model(runner, tiny_rgb(), 1, 3);
        FAIL("expected RunnerCrashed");
    } catch (const RunnerCrashed& e) {
        CHECK(e.code() == ErrorCode::RunnerCrashed);
        CHECK(e.stderr_text().find("simulated segfault") != std::string::npos);
    }
}
