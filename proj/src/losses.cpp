#include "depthbench/losses.hpp"

#include "depthbench/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace depthbench {
namespace {

void require_same_shape(const Field& a, const Field& b) {
    if (a.height != b.height || a.width != b.width || a.values.size() != b.values.size() ||
        a.values.size() != a.height * a.width) {
        throw Error(ErrorCode::ShapeMismatch, std::to_string(a.height) + "x" + std::to_string(a.width) +
                                                  " vs " + std::to_string(b.height) + "x" +
                                                  std::to_string(b.width));
    }
    if (a.values.empty()) {
        throw Error(ErrorCode::TooSmall, "empty field");
    }
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

Field residual(const Field& d, const Field& d_star) {
    Field r(d.height, d.width);
    for (std::size_t i = 0; i < r.size(); ++i) {
        r.values[i] = d.values[i] - d_star.values[i];
    }
    return r;
}

Field avg_pool_2x2(const Field& in) {
    Field out(in.height / 2, in.width / 2);
    for (std::size_t y = 0; y < out.height; ++y) {
        for (std::size_t x = 0; x < out.width; ++x) {
            out.at(y, x) = 0.25 * (in.at(2 * y, 2 * x) + in.at(2 * y, 2 * x + 1) + in.at(2 * y + 1, 2 * x) +
                                   in.at(2 * y + 1, 2 * x + 1));
        }
    }
    return out;
}

// Sum of |forward x-diff| + |forward y-diff| over one raster; when grad is
// given, accumulates scale * d(sum)/d(field) into it.
double forward_diff_l1(const Field& f, double scale, std::vector<double>* grad) {
    double sum = 0.0;
    const std::size_t h = f.height;
    const std::size_t w = f.width;
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t i = y * w + x;
            if (x + 1 < w) {
                const double gx = f.values[i + 1] - f.values[i];
                sum += std::abs(gx);
                if (grad) {
                    const double s = scale * sign(gx);
                    (*grad)[i + 1] += s;
                    (*grad)[i] -= s;
                }
            }
            if (y + 1 < h) {
                const double gy = f.values[i + w] - f.values[i];
                sum += std::abs(gy);
                if (grad) {
                    const double s = scale * sign(gy);
                    (*grad)[i + w] += s;
                    (*grad)[i] -= s;
                }
            }
        }
    }
    return sum;
}

} // namespace

LossEvaluation scale_invariant_loss(const Field& d, const Field& d_star) {
    require_same_shape(d, d_star);
    const std::size_t n = d.size();
    std::vector<double> g(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(d.values[i] > 0.0) || !(d_star.values[i] > 0.0)) {
            throw Error(ErrorCode::NonPositiveInput, "depth must be positive at index " + std::to_string(i));
        }
        g[i] = std::log(d.values[i]) - std::log(d_star.values[i]);
        sum += g[i];
    }
    const double nn = static_cast<double>(n);
    const double mean = sum / nn;

    // (1/n) sum g^2 - (1/n^2)(sum g)^2 is the population variance of g; the
    // centered form keeps it non-negative.
    LossEvaluation out;
    out.gradient.resize(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = g[i] - mean;
        var += c * c;
        out.gradient[i] = 2.0 * c / (nn * d.values[i]);
    }
    out.value = var / nn;
    return out;
}

ScaleResidualPyramid build_residual_pyramid(const Field& d, const Field& d_star, std::size_t levels) {
    require_same_shape(d, d_star);
    if (d.height < 2 || d.width < 2) {
        throw Error(ErrorCode::TooSmall, "gradient matching needs at least 2x2 inputs");
    }
    ScaleResidualPyramid pyramid;
    pyramid.levels.push_back(residual(d, d_star));
    while (pyramid.levels.size() < levels) {
        const Field& last = pyramid.levels.back();
        if (last.height / 2 < 2 || last.width / 2 < 2) {
            break;
        }
        pyramid.levels.push_back(avg_pool_2x2(last));
    }
    return pyramid;
}

LossEvaluation gradient_matching_loss(const Field& d, const Field& d_star, std::size_t levels) {
    const ScaleResidualPyramid pyramid = build_residual_pyramid(d, d_star, levels);
    const std::size_t depth = pyramid.levels.size();

    LossEvaluation out;
    std::vector<std::vector<double>> grads(depth);
    for (std::size_t k = 0; k < depth; ++k) {
        const Field& level = pyramid.levels[k];
        const double inv_m = 1.0 / static_cast<double>(level.size());
        grads[k].assign(level.size(), 0.0);
        out.value += inv_m * forward_diff_l1(level, inv_m, &grads[k]);
    }
    // Push each level's gradient back through the average pools.
    for (std::size_t k = depth - 1; k > 0; --k) {
        const Field& coarse = pyramid.levels[k];
        const std::size_t fine_w = pyramid.levels[k - 1].width;
        std::vector<double>& fine = grads[k - 1];
        for (std::size_t y = 0; y < coarse.height; ++y) {
            for (std::size_t x = 0; x < coarse.width; ++x) {
                const double g = 0.25 * grads[k][y * coarse.width + x];
                fine[(2 * y) * fine_w + 2 * x] += g;
                fine[(2 * y) * fine_w + 2 * x + 1] += g;
                fine[(2 * y + 1) * fine_w + 2 * x] += g;
                fine[(2 * y + 1) * fine_w + 2 * x + 1] += g;
            }
        }
    }
    out.gradient = std::move(grads[0]);
    return out;
}

namespace {

// Unit-normalized position vectors; zero-norm positions stay all-zero.
std::vector<double> normalized_positions(const FeatureMap& f, std::vector<double>* norms) {
    const std::size_t n = f.positions();
    const std::size_t c = f.channels;
    std::vector<double> u(n * c, 0.0);
    if (norms) {
        norms->assign(n, 0.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
        double sq = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            sq += f.values[i * c + k] * f.values[i * c + k];
        }
        const double norm = std::sqrt(sq);
        if (norms) {
            (*norms)[i] = norm;
        }
        if (norm < kAffinityNormEpsilon) {
            continue;
        }
        for (std::size_t k = 0; k < c; ++k) {
            u[i * c + k] = f.values[i * c + k] / norm;
        }
    }
    return u;
}

AffinityMap gram(const std::vector<double>& u, std::size_t n, std::size_t c) {
    AffinityMap a;
    a.n = n;
    a.values.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < c; ++k) {
                dot += u[i * c + k] * u[j * c + k];
            }
            a.values[i * n + j] = dot;
            a.values[j * n + i] = dot;
        }
    }
    return a;
}

void check_feature_map(const FeatureMap& f) {
    if (f.height == 0 || f.width == 0 || f.channels == 0 ||
        f.values.size() != f.height * f.width * f.channels) {
        throw Error(ErrorCode::ShapeMismatch, "feature map buffer does not match h*w*c");
    }
}

} // namespace

AffinityMap affinity_map(const FeatureMap& features) {
    check_feature_map(features);
    const auto u = normalized_positions(features, nullptr);
    AffinityMap a = gram(u, features.positions(), features.channels);
    // Unit diagonal exactly, rather than a rounded |u|^2, and no rounding
    // excursions past +-1 off the diagonal.
    for (std::size_t i = 0; i < a.n; ++i) {
        for (std::size_t j = 0; j < a.n; ++j) {
            double& v = a.values[i * a.n + j];
            v = (i == j && v != 0.0) ? 1.0 : std::clamp(v, -1.0, 1.0);
        }
    }
    return a;
}

LossEvaluation pairwise_distillation_loss(const FeatureMap& student, const FeatureMap& teacher) {
    check_feature_map(student);
    check_feature_map(teacher);
    if (student.height != teacher.height || student.width != teacher.width) {
        throw Error(ErrorCode::SpatialMismatch, "student and teacher feature maps differ spatially");
    }
    const std::size_t n = student.positions();
    const std::size_t c = student.channels;
    const double scale = 1.0 / static_cast<double>(n);  // 1 / (w * h)

    std::vector<double> norms;
    const auto u = normalized_positions(student, &norms);
    const AffinityMap as = affinity_map(student);
    const AffinityMap at = affinity_map(teacher);

    // G_ij = dL/da_ij (symmetric).
    LossEvaluation out;
    std::vector<double> g(n * n);
    for (std::size_t idx = 0; idx < n * n; ++idx) {
        const double diff = as.values[idx] - at.values[idx];
        out.value += diff * diff;
        g[idx] = 2.0 * scale * diff;
    }
    out.value *= scale;

    // a_ij = u_i . u_j, so dL/du_i = 2 sum_j G_ij u_j; then through u = f/|f|:
    // dL/df_i = (dL/du_i - (u_i . dL/du_i) u_i) / |f_i|.
    out.gradient.assign(n * c, 0.0);
    std::vector<double> du(c);
    for (std::size_t i = 0; i < n; ++i) {
        if (norms[i] < kAffinityNormEpsilon) {
            continue;
        }
        std::fill(du.begin(), du.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double gij = 2.0 * g[i * n + j];
            for (std::size_t k = 0; k < c; ++k) {
                du[k] += gij * u[j * c + k];
            }
        }
        double radial = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            radial += u[i * c + k] * du[k];
        }
        for (std::size_t k = 0; k < c; ++k) {
            out.gradient[i * c + k] = (du[k] - radial * u[i * c + k]) / norms[i];
        }
    }
    return out;
}

SmartLossEvaluation combined_smart_loss(const Field& d, const Field& d_star, const FeatureMap& student,
                                        const FeatureMap& teacher) {
    const LossEvaluation ls = scale_invariant_loss(d, d_star);
    const LossEvaluation lreg = gradient_matching_loss(d, d_star);
    const LossEvaluation lpa = pairwise_distillation_loss(student, teacher);

    SmartLossEvaluation out;
    out.scale_invariant = ls.value;
    out.gradient_matching = lreg.value;
    out.pairwise = lpa.value;
    out.value = kScaleInvariantWeight * ls.value + kGradientMatchingWeight * lreg.value +
                kPairwiseWeight * lpa.value;
    out.depth_gradient.resize(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        out.depth_gradient[i] = kScaleInvariantWeight * ls.gradient[i] + kGradientMatchingWeight * lreg.gradient[i];
    }
    out.feature_gradient.resize(lpa.gradient.size());
    for (std::size_t i = 0; i < lpa.gradient.size(); ++i) {
        out.feature_gradient[i] = kPairwiseWeight * lpa.gradient[i];
    }
    return out;
}

LossEvaluation rmse_loss(const Field& d, const Field& d_star) {
    require_same_shape(d, d_star);
    const std::size_t n = d.size();
    LossEvaluation out;
    out.gradient.resize(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = d.values[i] - d_star.values[i];
        out.gradient[i] = r;
        sq += r * r;
    }
    out.value = std::sqrt(sq / static_cast<double>(n));
    const double denom = static_cast<double>(n) * out.value;
    for (auto& g : out.gradient) {
        g = out.value > 0.0 ? g / denom : 0.0;
    }
    return out;
}

LossEvaluation mse_distill_loss(const Field& student_out, const Field& teacher_out) {
    require_same_shape(student_out, teacher_out);
    const std::size_t n = student_out.size();
    const double nn = static_cast<double>(n);
    LossEvaluation out;
    out.gradient.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = student_out.values[i] - teacher_out.values[i];
        out.value += r * r;
        out.gradient[i] = 2.0 * r / nn;
    }
    out.value /= nn;
    return out;
}

LossEvaluation l1_point_loss(const Field& d, const Field& d_star) {
    require_same_shape(d, d_star);
    const std::size_t n = d.size();
    const double nn = static_cast<double>(n);
    LossEvaluation out;
    out.gradient.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = d.values[i] - d_star.values[i];
        out.value += std::abs(r);
        out.gradient[i] = sign(r) / nn;
    }
    out.value /= nn;
    return out;
}

LossEvaluation l1_gradient_loss(const Field& d, const Field& d_star) {
    require_same_shape(d, d_star);
    const Field r = residual(d, d_star);
    const double inv_n = 1.0 / static_cast<double>(r.size());
    LossEvaluation out;
    out.gradient.assign(r.size(), 0.0);
    out.value = inv_n * forward_diff_l1(r, inv_n, &out.gradient);
    return out;
}

LossEvaluation ssim_loss(const Field& d, const Field& d_star) {
    require_same_shape(d, d_star);
    constexpr std::size_t k = kSsimWindow;
    if (d.height < k || d.width < k) {
        throw Error(ErrorCode::TooSmall, "ssim needs at least 7x7 inputs");
    }
    const double peak = *std::max_element(d_star.values.begin(), d_star.values.end());
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);

    const std::size_t out_h = d.height - k + 1;
    const std::size_t out_w = d.width - k + 1;
    const double windows = static_cast<double>(out_h * out_w);
    const double inv_k2 = 1.0 / static_cast<double>(k * k);
    // d(loss)/d(SSIM_window) for loss = (1 - mean SSIM) / 2.
    const double upstream = -0.5 / windows;

    LossEvaluation out;
    out.gradient.assign(d.size(), 0.0);
    double ssim_sum = 0.0;
    const std::size_t w = d.width;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (std::size_t dy = 0; dy < k; ++dy) {
                for (std::size_t dx = 0; dx < k; ++dx) {
                    const std::size_t i = (oy + dy) * w + ox + dx;
                    const double x = d.values[i];
                    const double y = d_star.values[i];
                    sx += x;
                    sy += y;
                    sxx += x * x;
                    syy += y * y;
                    sxy += x * y;
                }
            }
            const double mx = sx * inv_k2;
            const double my = sy * inv_k2;
            const double vx = sxx * inv_k2 - mx * mx;
            const double vy = syy * inv_k2 - my * my;
            const double cxy = sxy * inv_k2 - mx * my;

            const double a1 = 2.0 * mx * my + c1;
            const double a2 = 2.0 * cxy + c2;
            const double b1 = mx * mx + my * my + c1;
            const double b2 = vx + vy + c2;
            const double ssim = (a1 * a2) / (b1 * b2);
            ssim_sum += ssim;

            // Partials of SSIM w.r.t. the window statistics of x.
            const double d_mx = 2.0 * my * a2 / (b1 * b2) - ssim * 2.0 * mx / b1;
            const double d_vx = -ssim / b2;
            const double d_cxy = 2.0 * a1 / (b1 * b2);
            for (std::size_t dy = 0; dy < k; ++dy) {
                for (std::size_t dx = 0; dx < k; ++dx) {
                    const std::size_t i = (oy + dy) * w + ox + dx;
                    const double x = d.values[i];
                    const double y = d_star.values[i];
                    const double dssim = inv_k2 * (d_mx + d_vx * 2.0 * (x - mx) + d_cxy * (y - my));
                    out.gradient[i] += upstream * dssim;
                }
            }
        }
    }
    // SSIM <= 1; clamp the rounding residue at the optimum.
    out.value = std::max(0.0, 0.5 * (1.0 - ssim_sum / windows));
    return out;
}

} // namespace depthbench
