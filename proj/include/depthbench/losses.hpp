#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace depthbench {

/// Single-channel real raster (depth, disparity, network output).
struct Field {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;  // row-major

    Field() = default;
    Field(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), values(h * w, fill) {}
    Field(std::size_t h, std::size_t w, std::vector<double> v) : height(h), width(w), values(std::move(v)) {}

    std::size_t size() const { return values.size(); }
    double& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
    double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

/// h x w x c feature tensor, channel-fastest.
struct FeatureMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<double> values;

    FeatureMap() = default;
    FeatureMap(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
        : height(h), width(w), channels(c), values(h * w * c, fill) {}
    FeatureMap(std::size_t h, std::size_t w, std::size_t c, std::vector<double> v)
        : height(h), width(w), channels(c), values(std::move(v)) {}

    std::size_t positions() const { return height * width; }
    std::span<const double> feature(std::size_t i) const { return {values.data() + i * channels, channels}; }
};

/// n x n cosine-similarity matrix over the n = h*w spatial positions.
struct AffinityMap {
    std::size_t n = 0;
    std::vector<double> values;  // row-major n x n

    double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

/// Loss value with the gradient w.r.t. the differentiated input, laid out like it.
struct LossEvaluation {
    double value = 0.0;
    std::vector<double> gradient;
};

/// Residual R = d - d* followed by successive 2x2 average pools.
struct ScaleResidualPyramid {
    std::vector<Field> levels;
};

inline constexpr std::size_t kGradientMatchingLevels = 4;
inline constexpr std::size_t kSsimWindow = 7;
inline constexpr double kAffinityNormEpsilon = 1e-12;

// Weights of the combined distillation objective.
inline constexpr double kScaleInvariantWeight = 10.0;
inline constexpr double kGradientMatchingWeight = 0.1;
inline constexpr double kPairwiseWeight = 1000.0;

/// (1/n) sum g^2 - (1/n^2) (sum g)^2 with g = ln d - ln d*. Inputs must be > 0.
LossEvaluation scale_invariant_loss(const Field& d, const Field& d_star);

/// Builds min(levels, floor(log2(min(h, w)))) pyramid levels, each at least 2x2.
ScaleResidualPyramid build_residual_pyramid(const Field& d, const Field& d_star,
                                            std::size_t levels = kGradientMatchingLevels);

/// Multi-scale L1 of forward differences of the residual pyramid. Each level is
/// normalized by its own pixel count.
LossEvaluation gradient_matching_loss(const Field& d, const Field& d_star,
                                      std::size_t levels = kGradientMatchingLevels);

AffinityMap affinity_map(const FeatureMap& features);

/// (1/(w*h)) sum_ij (a^s_ij - a^t_ij)^2; gradient w.r.t. the student features.
/// Channel counts may differ; spatial sizes must agree.
LossEvaluation pairwise_distillation_loss(const FeatureMap& student, const FeatureMap& teacher);

struct SmartLossEvaluation {
    double value = 0.0;
    double scale_invariant = 0.0;
    double gradient_matching = 0.0;
    double pairwise = 0.0;
    std::vector<double> depth_gradient;    // w.r.t. d
    std::vector<double> feature_gradient;  // w.r.t. student features
};

/// 10 * L_s + 0.1 * L_reg + 1000 * L_pa.
SmartLossEvaluation combined_smart_loss(const Field& d, const Field& d_star, const FeatureMap& student,
                                        const FeatureMap& teacher);

LossEvaluation rmse_loss(const Field& d, const Field& d_star);
LossEvaluation mse_distill_loss(const Field& student_out, const Field& teacher_out);
LossEvaluation l1_point_loss(const Field& d, const Field& d_star);
LossEvaluation l1_gradient_loss(const Field& d, const Field& d_star);

/// (1 - mean local SSIM) / 2 over all valid 7x7 uniform windows, with
/// c1 = (0.01 L)^2, c2 = (0.03 L)^2 and L = max(d*).
LossEvaluation ssim_loss(const Field& d, const Field& d_star);

} // namespace depthbench
