#pragma once

#include "depthbench/losses.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace depthbench {

/// A loss viewed as a function of one flat input buffer.
using DifferentiableMap = std::function<LossEvaluation(const std::vector<double>&)>;

struct GradientCheck {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

/// Central differences per coordinate; the error at a coordinate is
/// |analytic - numeric| / max(|numeric|, 1e-8).
GradientCheck finite_difference_check(const DifferentiableMap& loss, const std::vector<double>& input,
                                      double step = 1e-5);

struct GradientSuiteRow {
    std::string loss;
    std::size_t trials = 0;
    double worst_error = 0.0;
    bool passed = false;
};

inline constexpr double kGradientTolerance = 1e-4;

/// Runs the finite-difference check over every loss on `trials` random
/// non-degenerate inputs (8x8 rasters, 4x4x3 student features).
std::vector<GradientSuiteRow> run_gradient_suite(std::uint64_t seed, std::size_t trials = 20,
                                                 double step = 1e-5,
                                                 double tolerance = kGradientTolerance);

} // namespace depthbench
