#include "depthbench/kernels.hpp"

#include "depthbench/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace depthbench {
namespace {

template <typename Fn>
void for_rows(WorkerPool* pool, std::size_t rows, Fn&& fn) {
    if (pool) {
        pool->parallel_for(rows, [&](std::size_t begin, std::size_t end) {
            for (std::size_t y = begin; y < end; ++y) fn(y);
        });
    } else {
        for (std::size_t y = 0; y < rows; ++y) fn(y);
    }
}

void expect_size(std::span<const float> buffer, std::size_t expected, const char* what) {
    if (buffer.size() != expected) {
        throw Error(ErrorCode::ShapeMismatch, std::string(what) + " has " + std::to_string(buffer.size()) +
                                                  " values, expected " + std::to_string(expected));
    }
}

void expect_bias(std::span<const float> bias, std::size_t channels) {
    if (!bias.empty()) {
        expect_size(bias, channels, "bias");
    }
}

} // namespace

Tensor conv2d(const Tensor& in, std::span<const float> weights, std::span<const float> bias, std::size_t kernel,
              std::size_t stride, std::size_t out_channels, WorkerPool* pool) {
    const std::size_t ci_n = in.channels;
    const std::size_t co_n = out_channels;
    expect_size(weights, kernel * kernel * ci_n * co_n, "conv2d weights");
    expect_bias(bias, co_n);
    const std::size_t pad = kernel / 2;
    Tensor out(conv_output_extent(in.height, kernel, stride), conv_output_extent(in.width, kernel, stride), co_n);

    for_rows(pool, out.height, [&](std::size_t oy) {
        for (std::size_t ox = 0; ox < out.width; ++ox) {
            float* dst = &out.data[(oy * out.width + ox) * co_n];
            if (bias.empty()) {
                std::fill(dst, dst + co_n, 0.0f);
            } else {
                std::copy(bias.begin(), bias.end(), dst);
            }
            for (std::size_t ky = 0; ky < kernel; ++ky) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.height)) continue;
                for (std::size_t kx = 0; kx < kernel; ++kx) {
                    const std::ptrdiff_t ix =
                        static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.width)) continue;
                    const float* src = &in.data[(static_cast<std::size_t>(iy) * in.width + static_cast<std::size_t>(ix)) * ci_n];
                    const float* w = &weights[(ky * kernel + kx) * ci_n * co_n];
                    for (std::size_t ci = 0; ci < ci_n; ++ci) {
                        const float v = src[ci];
                        const float* wr = w + ci * co_n;
                        for (std::size_t co = 0; co < co_n; ++co) {
                            dst[co] += v * wr[co];
                        }
                    }
                }
            }
        }
    });
    return out;
}

Tensor depthwise_conv2d(const Tensor& in, std::span<const float> weights, std::span<const float> bias,
                        std::size_t kernel, std::size_t stride, WorkerPool* pool) {
    const std::size_t c_n = in.channels;
    expect_size(weights, kernel * kernel * c_n, "depthwise weights");
    expect_bias(bias, c_n);
    const std::size_t pad = kernel / 2;
    Tensor out(conv_output_extent(in.height, kernel, stride), conv_output_extent(in.width, kernel, stride), c_n);

    for_rows(pool, out.height, [&](std::size_t oy) {
        for (std::size_t ox = 0; ox < out.width; ++ox) {
            float* dst = &out.data[(oy * out.width + ox) * c_n];
            if (bias.empty()) {
                std::fill(dst, dst + c_n, 0.0f);
            } else {
                std::copy(bias.begin(), bias.end(), dst);
            }
            for (std::size_t ky = 0; ky < kernel; ++ky) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.height)) continue;
                for (std::size_t kx = 0; kx < kernel; ++kx) {
                    const std::ptrdiff_t ix =
                        static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.width)) continue;
                    const float* src = &in.data[(static_cast<std::size_t>(iy) * in.width + static_cast<std::size_t>(ix)) * c_n];
                    const float* w = &weights[(ky * kernel + kx) * c_n];
                    for (std::size_t c = 0; c < c_n; ++c) {
                        dst[c] += src[c] * w[c];
                    }
                }
            }
        }
    });
    return out;
}

Tensor pointwise_conv(const Tensor& in, std::span<const float> weights, std::span<const float> bias,
                      std::size_t out_channels, WorkerPool* pool) {
    const std::size_t ci_n = in.channels;
    const std::size_t co_n = out_channels;
    expect_size(weights, ci_n * co_n, "pointwise weights");
    expect_bias(bias, co_n);
    Tensor out(in.height, in.width, co_n);

    for_rows(pool, out.height, [&](std::size_t y) {
        for (std::size_t x = 0; x < out.width; ++x) {
            const float* src = &in.data[(y * in.width + x) * ci_n];
            float* dst = &out.data[(y * out.width + x) * co_n];
            if (bias.empty()) {
                std::fill(dst, dst + co_n, 0.0f);
            } else {
                std::copy(bias.begin(), bias.end(), dst);
            }
            for (std::size_t ci = 0; ci < ci_n; ++ci) {
                const float v = src[ci];
                const float* wr = &weights[ci * co_n];
                for (std::size_t co = 0; co < co_n; ++co) {
                    dst[co] += v * wr[co];
                }
            }
        }
    });
    return out;
}

void hard_swish_inplace(Tensor& t) {
    for (float& v : t.data) {
        v = v * std::clamp(v + 3.0f, 0.0f, 6.0f) / 6.0f;
    }
}

void relu_inplace(Tensor& t) {
    for (float& v : t.data) {
        v = std::max(v, 0.0f);
    }
}

void softplus_inplace(Tensor& t) {
    constexpr float floor = std::numeric_limits<float>::min();
    for (float& v : t.data) {
        const float s = v > 0.0f ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
        v = std::max(s, floor);
    }
}

Tensor avg_pool(const Tensor& in, std::size_t kernel, std::size_t stride) {
    if (kernel == 0 || stride == 0 || in.height < kernel || in.width < kernel) {
        throw Error(ErrorCode::TooSmall, "avg_pool window larger than input");
    }
    Tensor out((in.height - kernel) / stride + 1, (in.width - kernel) / stride + 1, in.channels);
    const float inv = 1.0f / static_cast<float>(kernel * kernel);
    for (std::size_t oy = 0; oy < out.height; ++oy) {
        for (std::size_t ox = 0; ox < out.width; ++ox) {
            for (std::size_t c = 0; c < in.channels; ++c) {
                float sum = 0.0f;
                for (std::size_t ky = 0; ky < kernel; ++ky) {
                    for (std::size_t kx = 0; kx < kernel; ++kx) {
                        sum += in.at(oy * stride + ky, ox * stride + kx, c);
                    }
                }
                out.at(oy, ox, c) = sum * inv;
            }
        }
    }
    return out;
}

Tensor resize_nearest(const Tensor& in, std::size_t out_h, std::size_t out_w, WorkerPool* pool) {
    Tensor out(out_h, out_w, in.channels);
    const std::size_t c_n = in.channels;
    for_rows(pool, out_h, [&](std::size_t y) {
        const std::size_t sy = std::min(y * in.height / out_h, in.height - 1);
        for (std::size_t x = 0; x < out_w; ++x) {
            const std::size_t sx = std::min(x * in.width / out_w, in.width - 1);
            const float* src = &in.data[(sy * in.width + sx) * c_n];
            std::copy(src, src + c_n, &out.data[(y * out_w + x) * c_n]);
        }
    });
    return out;
}

Tensor resize_bilinear(const Tensor& in, std::size_t out_h, std::size_t out_w, WorkerPool* pool) {
    Tensor out(out_h, out_w, in.channels);
    const std::size_t c_n = in.channels;
    const float scale_y = static_cast<float>(in.height) / static_cast<float>(out_h);
    const float scale_x = static_cast<float>(in.width) / static_cast<float>(out_w);

    const auto source = [](std::size_t dst, float scale, std::size_t extent, std::size_t& lo, std::size_t& hi,
                           float& frac) {
        const float pos = std::max((static_cast<float>(dst) + 0.5f) * scale - 0.5f, 0.0f);
        lo = std::min(static_cast<std::size_t>(pos), extent - 1);
        hi = std::min(lo + 1, extent - 1);
        frac = pos - static_cast<float>(lo);
    };

    for_rows(pool, out_h, [&](std::size_t y) {
        std::size_t y0, y1;
        float fy;
        source(y, scale_y, in.height, y0, y1, fy);
        for (std::size_t x = 0; x < out_w; ++x) {
            std::size_t x0, x1;
            float fx;
            source(x, scale_x, in.width, x0, x1, fx);
            const float* p00 = &in.data[(y0 * in.width + x0) * c_n];
            const float* p01 = &in.data[(y0 * in.width + x1) * c_n];
            const float* p10 = &in.data[(y1 * in.width + x0) * c_n];
            const float* p11 = &in.data[(y1 * in.width + x1) * c_n];
            float* dst = &out.data[(y * out_w + x) * c_n];
            for (std::size_t c = 0; c < c_n; ++c) {
                const float top = p00[c] + (p01[c] - p00[c]) * fx;
                const float bottom = p10[c] + (p11[c] - p10[c]) * fx;
                dst[c] = top + (bottom - top) * fy;
            }
        }
    });
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.height != b.height || a.width != b.width) {
        throw Error(ErrorCode::ShapeMismatch, "concat inputs differ spatially");
    }
    Tensor out(a.height, a.width, a.channels + b.channels);
    const std::size_t pixels = a.height * a.width;
    for (std::size_t p = 0; p < pixels; ++p) {
        float* dst = &out.data[p * out.channels];
        std::copy_n(&a.data[p * a.channels], a.channels, dst);
        std::copy_n(&b.data[p * b.channels], b.channels, dst + a.channels);
    }
    return out;
}

} // namespace depthbench
