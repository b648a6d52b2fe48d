#pragma once

#include "depthbench/worker_pool.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace depthbench {

/// h x w x c float tensor, channel-fastest (HWC).
struct Tensor {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::size_t h, std::size_t w, std::size_t c, float fill = 0.0f)
        : height(h), width(w), channels(c), data(h * w * c, fill) {}

    float& at(std::size_t y, std::size_t x, std::size_t ch) { return data[(y * width + x) * channels + ch]; }
    float at(std::size_t y, std::size_t x, std::size_t ch) const { return data[(y * width + x) * channels + ch]; }
};

/// Output extent of a "same"-padded (pad = k/2) strided window.
constexpr std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride) {
    return (in + 2 * (kernel / 2) - kernel) / stride + 1;
}

// All kernels split work over output rows when given a pool; every output
// element is computed by the same instruction sequence regardless of thread
// count.

/// weights: [ky][kx][ci][co] (HWIO); bias: [co] or empty.
Tensor conv2d(const Tensor& in, std::span<const float> weights, std::span<const float> bias, std::size_t kernel,
              std::size_t stride, std::size_t out_channels, WorkerPool* pool = nullptr);

/// weights: [ky][kx][c]; bias: [c] or empty.
Tensor depthwise_conv2d(const Tensor& in, std::span<const float> weights, std::span<const float> bias,
                        std::size_t kernel, std::size_t stride, WorkerPool* pool = nullptr);

/// weights: [ci][co]; bias: [co] or empty.
Tensor pointwise_conv(const Tensor& in, std::span<const float> weights, std::span<const float> bias,
                      std::size_t out_channels, WorkerPool* pool = nullptr);

void hard_swish_inplace(Tensor& t);
void relu_inplace(Tensor& t);
/// log(1 + e^x), floored at the smallest normal float so the result stays > 0.
void softplus_inplace(Tensor& t);

/// Unpadded average pool.
Tensor avg_pool(const Tensor& in, std::size_t kernel, std::size_t stride);

/// src = floor(dst * in / out), matching the common framework default.
Tensor resize_nearest(const Tensor& in, std::size_t out_h, std::size_t out_w, WorkerPool* pool = nullptr);

/// Half-pixel-center bilinear interpolation with edge clamping.
Tensor resize_bilinear(const Tensor& in, std::size_t out_h, std::size_t out_w, WorkerPool* pool = nullptr);

/// Channel concatenation; spatial sizes must agree.
Tensor concat_channels(const Tensor& a, const Tensor& b);

} // namespace depthbench
