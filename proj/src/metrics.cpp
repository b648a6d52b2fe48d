#include "depthbench/metrics.hpp"

#include "depthbench/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>

namespace depthbench {
namespace {

constexpr std::size_t kBlock = 1024;

struct Sums {
    double sq_err = 0.0;     // sum (d - d*)^2
    double log_sum = 0.0;    // sum (g - shift)
    double log_sq = 0.0;     // sum (g - shift)^2
    double abs_log10 = 0.0;  // sum |log10 d - log10 d*|
    double abs_rel = 0.0;    // sum |d - d*| / d*
    std::size_t n = 0;

    void add(const Sums& o) {
        sq_err += o.sq_err;
        log_sum += o.log_sum;
        log_sq += o.log_sq;
        abs_log10 += o.abs_log10;
        abs_rel += o.abs_rel;
        n += o.n;
    }
};

// Single pass over the ground-truth mask; per-block partial sums keep long
// accumulations well conditioned.
Sums accumulate(const MetricDepthField& pred, const MetricDepthField& gt) {
    if (pred.width != gt.width || pred.height != gt.height || pred.depth_m.size() != gt.depth_m.size() ||
        gt.mask.size() != gt.depth_m.size()) {
        throw Error(ErrorCode::DimensionMismatch, "prediction and ground truth differ in shape");
    }
    static const double inv_ln10 = 1.0 / std::log(10.0);
    Sums total;
    // Log residuals are accumulated relative to the first one, so a prediction
    // that is an exact rescaling of the ground truth gives a variance of ~0
    // instead of a cancellation residue.
    bool have_shift = false;
    double shift = 0.0;
    const std::size_t count = gt.depth_m.size();
    for (std::size_t start = 0; start < count; start += kBlock) {
        const std::size_t end = std::min(count, start + kBlock);
        Sums block;
        for (std::size_t i = start; i < end; ++i) {
            if (!gt.mask[i]) {
                continue;
            }
            const double d = std::max(pred.depth_m[i], kDepthFloor);
            const double t = gt.depth_m[i];
            const double diff = d - t;
            const double g = std::log(d) - std::log(t);
            if (!have_shift) {
                shift = g;
                have_shift = true;
            }
            const double gs = g - shift;
            block.sq_err += diff * diff;
            block.log_sum += gs;
            block.log_sq += gs * gs;
            block.abs_log10 += std::abs(g) * inv_ln10;
            block.abs_rel += std::abs(diff) / t;
            ++block.n;
        }
        total.add(block);
    }
    if (total.n == 0) {
        throw Error(ErrorCode::NoValidPixels, "ground truth has no valid pixels");
    }
    return total;
}

double rmse_of(const Sums& s) { return std::sqrt(s.sq_err / static_cast<double>(s.n)); }

double si_rmse_of(const Sums& s) {
    const double n = static_cast<double>(s.n);
    const double mean = s.log_sum / n;
    // Variance in the mean-of-squares form; tiny negative values are rounding.
    const double var = s.log_sq / n - mean * mean;
    return std::sqrt(std::max(var, 0.0));
}

double log10_of(const Sums& s) { return s.abs_log10 / static_cast<double>(s.n); }
double rel_of(const Sums& s) { return s.abs_rel / static_cast<double>(s.n); }

} // namespace

double rmse(const MetricDepthField& pred, const MetricDepthField& gt) { return rmse_of(accumulate(pred, gt)); }

double si_rmse(const MetricDepthField& pred, const MetricDepthField& gt) {
    return si_rmse_of(accumulate(pred, gt));
}

double log10_error(const MetricDepthField& pred, const MetricDepthField& gt) {
    return log10_of(accumulate(pred, gt));
}

double rel_error(const MetricDepthField& pred, const MetricDepthField& gt) {
    return rel_of(accumulate(pred, gt));
}

MetricReport evaluate_image(const MetricDepthField& pred, const MetricDepthField& gt) {
    const Sums s = accumulate(pred, gt);
    return MetricReport{rmse_of(s), si_rmse_of(s), log10_of(s), rel_of(s), s.n};
}

MetricReport aggregate(std::span<const MetricReport> reports) {
    if (reports.empty()) {
        throw Error(ErrorCode::EmptyList, "no reports to aggregate");
    }
    MetricReport out;
    for (const auto& r : reports) {
        out.rmse += r.rmse;
        out.si_rmse += r.si_rmse;
        out.log10_err += r.log10_err;
        out.rel_err += r.rel_err;
        out.valid_pixels += r.valid_pixels;
    }
    const double n = static_cast<double>(reports.size());
    out.rmse /= n;
    out.si_rmse /= n;
    out.log10_err /= n;
    out.rel_err /= n;
    return out;
}

std::string to_json(const MetricReport& report) {
    nlohmann::ordered_json j;
    j["rmse"] = report.rmse;
    j["si_rmse"] = report.si_rmse;
    j["log10"] = report.log10_err;
    j["rel"] = report.rel_err;
    j["valid_pixels"] = report.valid_pixels;
    return j.dump();
}

MetricReport metric_report_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    MetricReport r;
    r.rmse = j.at("rmse").get<double>();
    r.si_rmse = j.at("si_rmse").get<double>();
    r.log10_err = j.at("log10").get<double>();
    r.rel_err = j.at("rel").get<double>();
    r.valid_pixels = j.at("valid_pixels").get<std::size_t>();
    return r;
}

} // namespace depthbench
