#include "depthbench/error.hpp"
#include "depthbench/kernels.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace depthbench;

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::size_t h, std::size_t w, std::size_t c) {
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    Tensor t(h, w, c);
    for (auto& v : t.data) v = u(rng);
    return t;
}

std::vector<float> random_vec(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<float> u(-0.5f, 0.5f);
    std::vector<float> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

double in_or_zero(const Tensor& t, long y, long x, std::size_t c) {
    if (y < 0 || x < 0 || y >= static_cast<long>(t.height) || x >= static_cast<long>(t.width)) return 0.0;
    return t.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c);
}

// Direct textbook loops in double precision.
Tensor ref_conv(const Tensor& in, const std::vector<float>& w, const std::vector<float>& b, std::size_t k,
                std::size_t s, std::size_t co_n) {
    const long pad = static_cast<long>(k / 2);
    const std::size_t oh = (in.height + 2 * (k / 2) - k) / s + 1;
    const std::size_t ow = (in.width + 2 * (k / 2) - k) / s + 1;
    Tensor out(oh, ow, co_n);
    for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox)
            for (std::size_t co = 0; co < co_n; ++co) {
                double acc = b.empty() ? 0.0 : b[co];
                for (std::size_t ky = 0; ky < k; ++ky)
                    for (std::size_t kx = 0; kx < k; ++kx)
                        for (std::size_t ci = 0; ci < in.channels; ++ci) {
                            const long y = static_cast<long>(oy * s + ky) - pad;
                            const long x = static_cast<long>(ox * s + kx) - pad;
                            acc += in_or_zero(in, y, x, ci) * w[((ky * k + kx) * in.channels + ci) * co_n + co];
                        }
                out.at(oy, ox, co) = static_cast<float>(acc);
            }
    return out;
}

Tensor ref_depthwise(const Tensor& in, const std::vector<float>& w, const std::vector<float>& b, std::size_t k,
                     std::size_t s) {
    const long pad = static_cast<long>(k / 2);
    const std::size_t oh = (in.height + 2 * (k / 2) - k) / s + 1;
    const std::size_t ow = (in.width + 2 * (k / 2) - k) / s + 1;
    Tensor out(oh, ow, in.channels);
    for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox)
            for (std::size_t c = 0; c < in.channels; ++c) {
                double acc = b.empty() ? 0.0 : b[c];
                for (std::size_t ky = 0; ky < k; ++ky)
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const long y = static_cast<long>(oy * s + ky) - pad;
                        const long x = static_cast<long>(ox * s + kx) - pad;
                        acc += in_or_zero(in, y, x, c) * w[(ky * k + kx) * in.channels + c];
                    }
                out.at(oy, ox, c) = static_cast<float>(acc);
            }
    return out;
}

Tensor ref_pointwise(const Tensor& in, const std::vector<float>& w, const std::vector<float>& b, std::size_t co_n) {
    Tensor out(in.height, in.width, co_n);
    for (std::size_t y = 0; y < in.height; ++y)
        for (std::size_t x = 0; x < in.width; ++x)
            for (std::size_t co = 0; co < co_n; ++co) {
                double acc = b.empty() ? 0.0 : b[co];
                for (std::size_t ci = 0; ci < in.channels; ++ci) acc += in.at(y, x, ci) * w[ci * co_n + co];
                out.at(y, x, co) = static_cast<float>(acc);
            }
    return out;
}

double ref_bilinear(const Tensor& in, std::size_t oy, std::size_t ox, std::size_t oh, std::size_t ow, std::size_t c) {
    const auto src = [](std::size_t d, std::size_t n_in, std::size_t n_out) {
        double p = (d + 0.5) * static_cast<double>(n_in) / static_cast<double>(n_out) - 0.5;
        return std::clamp(p, 0.0, static_cast<double>(n_in - 1));
    };
    const double py = src(oy, in.height, oh);
    const double px = src(ox, in.width, ow);
    const std::size_t y0 = static_cast<std::size_t>(py), x0 = static_cast<std::size_t>(px);
    const std::size_t y1 = std::min(y0 + 1, in.height - 1), x1 = std::min(x0 + 1, in.width - 1);
    const double fy = py - y0, fx = px - x0;
    return (1 - fy) * ((1 - fx) * in.at(y0, x0, c) + fx * in.at(y0, x1, c)) +
           fy * ((1 - fx) * in.at(y1, x0, c) + fx * in.at(y1, x1, c));
}

void check_close(const Tensor& a, const Tensor& b, double tol) {
    REQUIRE(a.height == b.height);
    REQUIRE(a.width == b.width);
    REQUIRE(a.channels == b.channels);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        worst = std::max(worst, static_cast<double>(std::abs(a.data[i] - b.data[i])));
    }
    CHECK(worst <= tol);
}

} // namespace

TEST_CASE("output extent") {
    CHECK(conv_output_extent(9, 3, 1) == 9);
    CHECK(conv_output_extent(9, 3, 2) == 5);
    CHECK(conv_output_extent(128, 3, 2) == 64);
    CHECK(conv_output_extent(7, 1, 1) == 7);
}

TEST_CASE("conv2d matches direct loops") {
    std::mt19937_64 rng(1);
    for (std::size_t stride : {1u, 2u}) {
        for (std::size_t k : {1u, 3u, 5u}) {
            const Tensor in = random_tensor(rng, 9, 7, 5);
            const auto w = random_vec(rng, k * k * 5 * 6);
            const auto b = random_vec(rng, 6);
            check_close(conv2d(in, w, b, k, stride, 6), ref_conv(in, w, b, k, stride, 6), 1e-5);
            check_close(conv2d(in, w, {}, k, stride, 6), ref_conv(in, w, {}, k, stride, 6), 1e-5);
        }
    }
}

TEST_CASE("depthwise and pointwise match direct loops") {
    std::mt19937_64 rng(2);
    for (std::size_t stride : {1u, 2u}) {
        const Tensor in = random_tensor(rng, 9, 7, 5);
        const auto w = random_vec(rng, 9 * 5);
        const auto b = random_vec(rng, 5);
        check_close(depthwise_conv2d(in, w, b, 3, stride), ref_depthwise(in, w, b, 3, stride), 1e-5);
    }
    const Tensor in = random_tensor(rng, 9, 7, 5);
    const auto w = random_vec(rng, 5 * 8);
    const auto b = random_vec(rng, 8);
    check_close(pointwise_conv(in, w, b, 8), ref_pointwise(in, w, b, 8), 1e-5);
}

TEST_CASE("activations") {
    Tensor t(1, 1, 7);
    t.data = {-5.0f, -3.0f, -1.0f, 0.0f, 1.0f, 3.0f, 5.0f};
    Tensor hs = t;
    hard_swish_inplace(hs);
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        const double x = t.data[i];
        CHECK(hs.data[i] == doctest::Approx(x * std::clamp(x + 3.0, 0.0, 6.0) / 6.0).epsilon(1e-6));
    }
    Tensor r = t;
    relu_inplace(r);
    CHECK(r.data == std::vector<float>{0, 0, 0, 0, 1, 3, 5});

    Tensor s(1, 1, 5);
    s.data = {-200.0f, -3.0f, 0.0f, 2.0f, 90.0f};
    softplus_inplace(s);
    CHECK(s.data[0] > 0.0f);
    CHECK(s.data[1] == doctest::Approx(std::log1p(std::exp(-3.0))).epsilon(1e-6));
    CHECK(s.data[2] == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    CHECK(s.data[3] == doctest::Approx(std::log1p(std::exp(2.0))).epsilon(1e-6));
    CHECK(s.data[4] == doctest::Approx(90.0).epsilon(1e-6));
}

TEST_CASE("pooling, resizing and concatenation") {
    std::mt19937_64 rng(3);
    const Tensor in = random_tensor(rng, 9, 7, 5);

    const Tensor p = avg_pool(in, 2, 2);
    CHECK(p.height == 4);
    CHECK(p.width == 3);
    for (std::size_t y = 0; y < p.height; ++y)
        for (std::size_t x = 0; x < p.width; ++x)
            for (std::size_t c = 0; c < 5; ++c) {
                const double m = (in.at(2 * y, 2 * x, c) + in.at(2 * y, 2 * x + 1, c) + in.at(2 * y + 1, 2 * x, c) +
                                  in.at(2 * y + 1, 2 * x + 1, c)) /
                                 4.0;
                CHECK(std::abs(p.at(y, x, c) - m) < 1e-6);
            }
    CHECK_THROWS_AS(avg_pool(in, 10, 1), Error);

    const Tensor n = resize_nearest(in, 20, 11);
    for (std::size_t y = 0; y < 20; ++y)
        for (std::size_t x = 0; x < 11; ++x)
            for (std::size_t c = 0; c < 5; ++c) CHECK(n.at(y, x, c) == in.at(y * 9 / 20, x * 7 / 11, c));

    for (auto [oh, ow] : {std::pair<std::size_t, std::size_t>{20, 11}, {4, 3}, {9, 7}, {1, 1}}) {
        const Tensor b = resize_bilinear(in, oh, ow);
        double worst = 0.0;
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x)
                for (std::size_t c = 0; c < 5; ++c)
                    worst = std::max(worst, std::abs(b.at(y, x, c) - ref_bilinear(in, y, x, oh, ow, c)));
        CHECK(worst < 1e-5);
    }

    Tensor constant(6, 5, 2, 0.625f);
    for (float v : resize_bilinear(constant, 13, 17).data) CHECK(v == 0.625f);
    for (float v : resize_nearest(constant, 3, 2).data) CHECK(v == 0.625f);

    const Tensor other = random_tensor(rng, 9, 7, 2);
    const Tensor cat = concat_channels(in, other);
    CHECK(cat.channels == 7);
    CHECK(cat.at(4, 3, 2) == in.at(4, 3, 2));
    CHECK(cat.at(4, 3, 6) == other.at(4, 3, 1));
    CHECK_THROWS_AS(concat_channels(in, random_tensor(rng, 8, 7, 2)), Error);
}

TEST_CASE("thread count does not change results") {
    std::mt19937_64 rng(4);
    const Tensor in = random_tensor(rng, 33, 29, 6);
    const auto w = random_vec(rng, 9 * 6 * 10);
    const auto dw = random_vec(rng, 9 * 6);
    const auto pw = random_vec(rng, 6 * 10);
    WorkerPool four(4);
    CHECK(conv2d(in, w, {}, 3, 2, 10).data == conv2d(in, w, {}, 3, 2, 10, &four).data);
    CHECK(depthwise_conv2d(in, dw, {}, 3, 1).data == depthwise_conv2d(in, dw, {}, 3, 1, &four).data);
    CHECK(pointwise_conv(in, pw, {}, 10).data == pointwise_conv(in, pw, {}, 10, &four).data);
    CHECK(resize_bilinear(in, 70, 50).data == resize_bilinear(in, 70, 50, &four).data);
    CHECK(resize_nearest(in, 70, 50).data == resize_nearest(in, 70, 50, &four).data);
}

TEST_CASE("worker pool covers every index exactly once") {
    for (std::size_t threads : {1u, 2u, 3u, 8u}) {
        WorkerPool pool(threads);
        for (std::size_t count : {0u, 1u, 5u, 100u}) {
            std::vector<int> hits(count, 0);
            pool.parallel_for(count, [&](std::size_t b, std::size_t e) {
                for (std::size_t i = b; i < e; ++i) ++hits[i];
            });
            for (int h : hits) CHECK(h == 1);
        }
    }
}
