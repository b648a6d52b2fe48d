#include "depthbench/error.hpp"
#include "depthbench/micronet.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace depthbench;

namespace {

RgbImage random_rgb(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> u(0, 255);
    RgbImage img;
    img.width = kNetInputWidth;
    img.height = kNetInputHeight;
    img.values.resize(img.width * img.height * 3);
    for (auto& v : img.values) v = static_cast<std::uint8_t>(u(rng));
    return img;
}

std::size_t conv_params(std::size_t k, std::size_t ci, std::size_t co) { return k * k * ci * co + co; }

// Parameter count tallied from the architecture table, independent of the
// graph builder.
std::size_t tally_reference_parameters() {
    std::size_t total = conv_params(3, 3, 16);
    const auto unit = [&](std::size_t in, std::size_t expand, std::size_t out) {
        total += conv_params(1, in, expand) + (9 * expand + expand) + conv_params(1, expand, out);
    };
    unit(16, 16, 16);
    unit(16, 64, 24);
    unit(24, 72, 24);
    unit(24, 72, 40);
    unit(40, 120, 40);
    unit(40, 120, 40);
    unit(40, 240, 80);
    unit(80, 200, 80);
    unit(80, 184, 80);
    unit(80, 184, 80);
    unit(80, 480, 112);
    unit(112, 672, 112);
    const std::size_t skip_channels[] = {80, 40, 24, 16, 3};
    const std::size_t widths[] = {160, 128, 64, 32, 16};
    std::size_t dec = 112;
    for (int s = 0; s < 5; ++s) {
        total += conv_params(1, dec + skip_channels[s], widths[s]) + conv_params(3, widths[s], widths[s]);
        dec = widths[s];
    }
    return total + conv_params(1, 16, 1);
}

} // namespace

TEST_CASE("parameter arithmetic on single layers") {
    GraphBuilder b("x", {8, 8, 3});
    const auto pw = b.pointwise("pw", "x", 8);
    GraphBuilder c("y", {8, 8, 16});
    const auto dw = c.depthwise("dw", "y", 3, 1);

    const NetworkGraph g1 = b.finish(pw);
    const NetworkGraph g2 = c.finish(dw);
    CHECK(param_stats(g1, init_weights(g1, 0)).parameter_count == 32);
    CHECK(param_stats(g2, init_weights(g2, 0)).parameter_count == 160);
    CHECK(param_stats(g2, init_weights(g2, 0)).fp32_size_bytes == 640);
}

TEST_CASE("reference net structure") {
    const ReferenceNet net = build_reference_net(0);
    net.graph.validate();
    const TensorShape out = net.graph.output_shape();
    CHECK(out.height == 480);
    CHECK(out.width == 640);
    CHECK(out.channels == 1);

    const ParamStats stats = param_stats(net.graph, net.weights);
    CHECK(stats.parameter_count == tally_reference_parameters());
    CHECK(stats.fp32_size_bytes == 4 * stats.parameter_count);
    CHECK(stats.fp32_size_mib() >= 2.7);
    CHECK(stats.fp32_size_mib() <= 4.1);
    CHECK(stats.total_macs > 0);

    // Each encoder block halves the 160x128 working resolution.
    CHECK(net.graph.shapes.at("enc1.u1.project") == TensorShape{64, 80, 16});
    CHECK(net.graph.shapes.at("enc2.u1.project") == TensorShape{32, 40, 24});
    CHECK(net.graph.shapes.at("enc3.u2.project") == TensorShape{16, 20, 40});
    CHECK(net.graph.shapes.at("enc4.u3.project") == TensorShape{8, 10, 80});
    CHECK(net.graph.shapes.at("enc5.u1.project") == TensorShape{4, 5, 112});
    CHECK(net.graph.skip_edges.size() == 5);
}

TEST_CASE("weights are a pure function of the seed") {
    const ReferenceNet a = build_reference_net(0);
    const ReferenceNet b = build_reference_net(0);
    const ReferenceNet c = build_reference_net(1);
    CHECK(a.weights == b.weights);
    CHECK_FALSE(a.weights == c.weights);
    for (std::size_t i = 0; i < a.graph.layers.size(); ++i) {
        const auto layout = parameter_layout(a.graph, a.graph.layers[i]);
        REQUIRE(layout.size() == a.weights.layers[i].size());
        for (std::size_t j = 0; j < layout.size(); ++j) CHECK(layout[j] == a.weights.layers[i][j].size());
    }
}

TEST_CASE("graph validation rejects broken graphs") {
    GraphBuilder b("x", {8, 8, 3});
    const auto y = b.pointwise("pw", "x", 4);
    NetworkGraph g = b.finish(y);

    NetworkGraph dangling = g;
    dangling.layers[0].inputs = {"nowhere"};
    CHECK_THROWS_AS(dangling.validate(), Error);

    NetworkGraph wrong_shape = g;
    wrong_shape.shapes[y].channels = 5;
    CHECK_THROWS_AS(wrong_shape.validate(), Error);

    NetworkGraph redefined = g;
    redefined.layers.push_back(redefined.layers[0]);
    CHECK_THROWS_AS(redefined.validate(), Error);
}

TEST_CASE("forward pass") {
    const ReferenceNet net = build_reference_net(0);
    const RgbImage img = random_rgb(3);

    const MetricDepthField a = forward(net.graph, net.weights, img, 1);
    CHECK(a.width == 640);
    CHECK(a.height == 480);
    bool positive = true;
    for (double v : a.depth_m) positive = positive && v > 0.0 && std::isfinite(v);
    CHECK(positive);

    const MetricDepthField again = forward(net.graph, net.weights, img, 1);
    CHECK(again.depth_m == a.depth_m);

    const MetricDepthField threaded = forward(net.graph, net.weights, img, 4);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.depth_m.size(); ++i) worst = std::max(worst, std::abs(a.depth_m[i] - threaded.depth_m[i]));
    CHECK(worst <= 1e-6);

    RgbImage small = img;
    small.width = 320;
    small.height = 240;
    small.values.resize(320 * 240 * 3);
    try {
        forward(net.graph, net.weights, small, 1);
        FAIL("expected WrongInputShape");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::WrongInputShape);
    }
}
