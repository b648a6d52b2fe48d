#pragma once

#include "depthbench/dataset_io.hpp"

#include <cstddef>
#include <span>
#include <string>

namespace depthbench {

/// Predictions are clamped to this floor (meters) before any log or division.
inline constexpr double kDepthFloor = 1e-3;

struct MetricReport {
    double rmse = 0.0;       // meters
    double si_rmse = 0.0;    // natural-log space
    double log10_err = 0.0;
    double rel_err = 0.0;
    std::size_t valid_pixels = 0;
};

// Evaluation runs over the ground-truth mask. Each op throws
// Error(DimensionMismatch) on shape disagreement and Error(NoValidPixels) when
// the ground truth has no valid pixel.
double rmse(const MetricDepthField& pred, const MetricDepthField& gt);
double si_rmse(const MetricDepthField& pred, const MetricDepthField& gt);
double log10_error(const MetricDepthField& pred, const MetricDepthField& gt);
double rel_error(const MetricDepthField& pred, const MetricDepthField& gt);

MetricReport evaluate_image(const MetricDepthField& pred, const MetricDepthField& gt);

/// Unweighted mean of each metric across images; valid_pixels are summed.
MetricReport aggregate(std::span<const MetricReport> reports);

std::string to_json(const MetricReport& report);
MetricReport metric_report_from_json(const std::string& text);

} // namespace depthbench
