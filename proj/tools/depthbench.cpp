// depthbench: evaluation, scoring, latency and gradient-check front end.
//
// Exit codes: 0 success, 1 validation or runtime failure, 2 usage error.

#include "depthbench/bench.hpp"
#include "depthbench/dataset_io.hpp"
#include "depthbench/error.hpp"
#include "depthbench/gradcheck.hpp"
#include "depthbench/leaderboard.hpp"
#include "depthbench/metrics.hpp"
#include "depthbench/micronet.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace depthbench;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::NotFound, path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_output(const std::string& out_path, const std::string& text) {
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << "\n";
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write " + out_path);
    }
    out << text;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::vector<std::string> split_command(const std::string& command) {
    std::vector<std::string> out;
    std::istringstream in(command);
    std::string token;
    while (in >> token) out.push_back(token);
    return out;
}

// --- evaluate -------------------------------------------------------------

struct EvaluateArgs {
    std::string manifest;
    std::string predictions;
    std::string out;
    std::string split;
};

int run_evaluate(const EvaluateArgs& args) {
    const fs::path manifest_path(args.manifest);
    const DatasetManifest manifest = load_manifest(manifest_path);
    const fs::path base = manifest_path.parent_path();

    nlohmann::ordered_json images = nlohmann::ordered_json::array();
    std::vector<MetricReport> reports;
    int failures = 0;
    for (const auto& entry : manifest.entries) {
        if (!args.split.empty() && args.split != to_string(entry.split)) {
            continue;
        }
        const fs::path gt_path = resolve(base, entry.depth_path);
        const fs::path pred_path = fs::path(args.predictions) / (gt_path.stem().string() + ".png");
        try {
            const auto gt = to_metric_depth(load_depth_png(gt_path, entry.unit_scale));
            const auto pred = to_metric_depth(load_depth_png(pred_path, entry.unit_scale));
            const MetricReport r = evaluate_image(pred, gt);
            reports.push_back(r);
            auto j = nlohmann::ordered_json::parse(to_json(r));
            j["depth"] = entry.depth_path;
            images.push_back(std::move(j));
        } catch (const Error& e) {
            std::cerr << "evaluate: " << entry.depth_path << ": " << e.what() << "\n";
            ++failures;
        }
    }
    if (reports.empty()) {
        std::cerr << "evaluate: no images evaluated\n";
        return kExitFailure;
    }
    nlohmann::ordered_json doc;
    doc["images"] = std::move(images);
    doc["aggregate"] = nlohmann::ordered_json::parse(to_json(aggregate(reports)));
    doc["failures"] = failures;
    write_output(args.out, doc.dump(2) + "\n");
    return failures == 0 ? kExitOk : kExitFailure;
}

// --- score ----------------------------------------------------------------

struct ScoreArgs {
    std::string results;
    bool builtin = false;
    bool fit_c = false;
    double c = kFittedNormalization;
    std::string format = "text";
    std::string out;
};

int run_score(const ScoreArgs& args) {
    const auto format = parse_report_format(args.format);
    if (!format) {
        std::cerr << "score: unknown format \"" << args.format << "\"\n";
        return kExitUsage;
    }
    if (args.results.empty() && !args.builtin) {
        std::cerr << "score: pass --results FILE or --builtin\n";
        return kExitUsage;
    }
    const std::vector<SubmissionRecord> records =
        args.builtin ? published_challenge_results() : parse_results_json(read_file(args.results));

    ScoringConfig config;
    config.c = args.c;
    if (args.fit_c) {
        const NormalizationFit fit = fit_normalization_constant(records);
        config.c = fit.c;
        std::cerr << "fitted C = " << fit.c << " from " << fit.inliers << " rows, max relative deviation "
                  << fit.max_relative_deviation * 100.0 << "%\n";
        for (const auto& row : fit.rows) {
            if (row.outlier) {
                std::cerr << "  inconsistent row: " << row.team << " (implied C is " << row.ratio
                          << "x the fit)\n";
            }
        }
    }
    const auto rows = rank(records, config);
    write_output(args.out, render_report(rows, *format));
    return kExitOk;
}

// --- bench ----------------------------------------------------------------

struct BenchArgs {
    std::string runner;
    std::string input;
    std::size_t warmup = kDefaultWarmupRuns;
    std::size_t runs = kDefaultMeasuredRuns;
    bool in_process = false;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::string workdir;
    std::string out;
};

int run_bench(const BenchArgs& args) {
    const RgbImage input = load_rgb_png(args.input);
    TimingReport report;
    if (args.in_process) {
        const ReferenceNet net = build_reference_net(args.seed);
        WorkerPool pool(args.threads);
        auto runner = RunnerHandle::in_process(
            [&](const RgbImage& rgb) { (void)forward(net.graph, net.weights, rgb, pool); });
        report = time_model(runner, input, args.warmup, args.runs);
    } else {
        const auto command = split_command(args.runner);
        if (command.empty()) {
            std::cerr << "bench: pass --runner CMD or --in-process\n";
            return kExitUsage;
        }
        auto runner = spawn_runner(command, args.workdir);
        report = time_model(runner, input, args.warmup, args.runs);
    }
    write_output(args.out, to_json(report) + "\n");
    return kExitOk;
}

// --- infer / runner / net-info --------------------------------------------

struct InferArgs {
    std::uint64_t seed = 0;
    std::string input;
    std::string output;
    std::size_t threads = 1;
};

void infer_file(const ReferenceNet& net, WorkerPool& pool, const fs::path& input, const fs::path& output) {
    const RgbImage rgb = load_rgb_png(input);
    const MetricDepthField depth = forward(net.graph, net.weights, rgb, pool);
    save_depth_png(output, from_metric_depth(depth, kDefaultUnitScale));
}

int run_infer(const InferArgs& args) {
    const ReferenceNet net = build_reference_net(args.seed);
    WorkerPool pool(args.threads);
    infer_file(net, pool, args.input, args.output);
    return kExitOk;
}

int run_runner(const InferArgs& args) {
    const ReferenceNet net = build_reference_net(args.seed);
    WorkerPool pool(args.threads);
    return serve_runner([&](const fs::path& in, const fs::path& out) { infer_file(net, pool, in, out); });
}

int run_net_info(std::uint64_t seed) {
    const ReferenceNet net = build_reference_net(seed);
    std::cout << to_json(param_stats(net.graph, net.weights)) << "\n";
    return kExitOk;
}

// --- check-gradients ------------------------------------------------------

int run_check_gradients(std::uint64_t seed, std::size_t trials) {
    const auto rows = run_gradient_suite(seed, trials);
    bool ok = true;
    std::printf("%-26s %7s %14s  %s\n", "loss", "trials", "max rel err", "result");
    for (const auto& row : rows) {
        std::printf("%-26s %7zu %14.3e  %s\n", row.loss.c_str(), row.trials, row.worst_error,
                    row.passed ? "PASS" : "FAIL");
        ok = ok && row.passed;
    }
    std::printf("tolerance %.0e, central differences with h = 1e-5\n", kGradientTolerance);
    return ok ? kExitOk : kExitFailure;
}

// --- lint-dataset ---------------------------------------------------------

int run_lint(const std::string& manifest_arg) {
    const fs::path manifest_path(manifest_arg);
    const DatasetManifest manifest = load_manifest(manifest_path);
    const fs::path base = manifest_path.parent_path();
    std::size_t errors = 0;
    std::size_t warnings = 0;
    for (const auto& entry : manifest.entries) {
        try {
            const RgbImage rgb = load_rgb_png(resolve(base, entry.rgb_path));
            const DepthMap depth = load_depth_png(resolve(base, entry.depth_path), entry.unit_scale);
            const ValidationReport report = validate_pair(rgb, depth);
            for (const auto& f : report.findings) {
                const bool is_error = f.severity == Severity::Error;
                (is_error ? errors : warnings) += 1;
                std::cout << (is_error ? "error   " : "warning ") << entry.rgb_path << ": " << to_string(f.kind)
                          << " (" << f.message << ")\n";
            }
            std::cout << "ok      " << entry.rgb_path << ": invalid fraction " << report.invalid_fraction << "\n";
        } catch (const Error& e) {
            ++errors;
            std::cout << "error   " << entry.rgb_path << ": " << e.what() << "\n";
        }
    }
    std::cout << manifest.entries.size() << " entries, " << errors << " errors, " << warnings << " warnings\n";
    return errors == 0 ? kExitOk : kExitFailure;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Depth-estimation benchmarking: metrics, scoring, latency and loss gradients"};
    app.require_subcommand(1);

    EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate prediction PNGs against a manifest's ground truth");
    evaluate->add_option("--manifest", eval_args.manifest, "JSON-lines dataset manifest")->required();
    evaluate->add_option("--predictions", eval_args.predictions, "Directory of <depth stem>.png predictions")
        ->required();
    evaluate->add_option("--out", eval_args.out, "Report path (default stdout)");
    evaluate->add_option("--split", eval_args.split, "Only evaluate this split")
        ->check(CLI::IsMember({"train", "val", "test"}));

    ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "Compute final scores and rank submissions");
    score->add_option("--results", score_args.results, "JSON results file");
    score->add_flag("--builtin", score_args.builtin, "Use the bundled published leaderboard");
    score->add_flag("--fit-c", score_args.fit_c, "Fit C from rows carrying a published score");
    score->add_option("--c", score_args.c, "Normalization constant (per second)")->check(CLI::PositiveNumber);
    score->add_option("--format", score_args.format, "text | csv | json");
    score->add_option("--out", score_args.out, "Output path (default stdout)");

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "Time a model runner");
    bench->add_option("--runner", bench_args.runner, "Runner command line");
    bench->add_option("--input", bench_args.input, "RGB PNG input")->required();
    bench->add_option("--warmup", bench_args.warmup, "Unmeasured warmup runs");
    bench->add_option("--runs", bench_args.runs, "Measured runs")->check(CLI::PositiveNumber);
    bench->add_flag("--in-process", bench_args.in_process, "Time the built-in reference net in process");
    bench->add_option("--seed", bench_args.seed, "Reference net seed (with --in-process)");
    bench->add_option("--threads", bench_args.threads, "Worker threads (with --in-process)")
        ->check(CLI::PositiveNumber);
    bench->add_option("--workdir", bench_args.workdir, "Runner working directory");
    bench->add_option("--out", bench_args.out, "Timing report path (default stdout)");

    InferArgs infer_args;
    auto* infer = app.add_subcommand("infer", "Run the reference net on one RGB PNG");
    infer->add_option("--seed", infer_args.seed, "Weight seed");
    infer->add_option("--input", infer_args.input, "RGB PNG (640x480)")->required();
    infer->add_option("--output", infer_args.output, "16-bit depth PNG (millimeters)")->required();
    infer->add_option("--threads", infer_args.threads, "Worker threads")->check(CLI::PositiveNumber);

    InferArgs runner_args;
    auto* runner = app.add_subcommand("runner", "Serve the reference net over the runner protocol on stdio");
    runner->add_option("--seed", runner_args.seed, "Weight seed");
    runner->add_option("--threads", runner_args.threads, "Worker threads")->check(CLI::PositiveNumber);

    std::uint64_t info_seed = 0;
    auto* net_info = app.add_subcommand("net-info", "Print reference net parameter and MAC counts as JSON");
    net_info->add_option("--seed", info_seed, "Weight seed");

    std::uint64_t grad_seed = 7;
    std::size_t grad_trials = 20;
    auto* check = app.add_subcommand("check-gradients", "Finite-difference check of every loss gradient");
    check->add_option("--seed", grad_seed, "Sampler seed");
    check->add_option("--trials", grad_trials, "Random inputs per loss")->check(CLI::PositiveNumber);

    std::string lint_manifest;
    auto* lint = app.add_subcommand("lint-dataset", "Validate every RGB / depth pair in a manifest");
    lint->add_option("--manifest", lint_manifest, "JSON-lines dataset manifest")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*evaluate) return run_evaluate(eval_args);
        if (*score) return run_score(score_args);
        if (*bench) return run_bench(bench_args);
        if (*infer) return run_infer(infer_args);
        if (*runner) return run_runner(runner_args);
        if (*net_info) return run_net_info(info_seed);
        if (*check) return run_check_gradients(grad_seed, grad_trials);
        if (*lint) return run_lint(lint_manifest);
    } catch (const RunnerCrashed& e) {
        std::cerr << "depthbench: " << e.what() << "\n--- runner stderr ---\n" << e.stderr_text() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "depthbench: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}
