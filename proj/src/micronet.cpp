#include "depthbench/micronet.hpp"

#include "depthbench/error.hpp"

#include "json.hpp"

#include <cmath>
#include <random>
#include <set>
#include <unordered_map>

namespace depthbench {

const char* to_string(LayerKind kind) {
    switch (kind) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::DepthwiseConv2d: return "depthwise_conv2d";
    case LayerKind::PointwiseConv: return "pointwise_conv";
    case LayerKind::HardSwish: return "hard_swish";
    case LayerKind::Relu: return "relu";
    case LayerKind::Softplus: return "softplus";
    case LayerKind::AvgPool: return "avg_pool";
    case LayerKind::ResizeNearest: return "resize_nearest";
    case LayerKind::ResizeBilinear: return "resize_bilinear";
    case LayerKind::Concat: return "concat";
    case LayerKind::FfmFuse: return "ffm_fuse";
    }
    return "unknown";
}

namespace {

[[noreturn]] void invalid(const LayerSpec& layer, const std::string& why) {
    throw Error(ErrorCode::InvalidGraph, layer.name + ": " + why);
}

std::size_t expected_inputs(LayerKind kind) {
    return (kind == LayerKind::Concat || kind == LayerKind::FfmFuse) ? 2 : 1;
}

TensorShape infer_shape(const LayerSpec& layer, const std::vector<TensorShape>& in) {
    if (in.size() != expected_inputs(layer.kind)) {
        invalid(layer, "wrong number of inputs");
    }
    const TensorShape& a = in[0];
    switch (layer.kind) {
    case LayerKind::Conv2d:
    case LayerKind::DepthwiseConv2d: {
        if (layer.kernel == 0 || layer.stride == 0) invalid(layer, "kernel and stride must be positive");
        const std::size_t c = layer.kind == LayerKind::Conv2d ? layer.out_channels : a.channels;
        if (c == 0) invalid(layer, "zero output channels");
        return {conv_output_extent(a.height, layer.kernel, layer.stride),
                conv_output_extent(a.width, layer.kernel, layer.stride), c};
    }
    case LayerKind::PointwiseConv:
        if (layer.out_channels == 0) invalid(layer, "zero output channels");
        return {a.height, a.width, layer.out_channels};
    case LayerKind::HardSwish:
    case LayerKind::Relu:
    case LayerKind::Softplus:
        return a;
    case LayerKind::AvgPool:
        if (layer.kernel == 0 || layer.stride == 0 || a.height < layer.kernel || a.width < layer.kernel) {
            invalid(layer, "pool window does not fit");
        }
        return {(a.height - layer.kernel) / layer.stride + 1, (a.width - layer.kernel) / layer.stride + 1,
                a.channels};
    case LayerKind::ResizeNearest:
    case LayerKind::ResizeBilinear:
        if (layer.out_height == 0 || layer.out_width == 0) invalid(layer, "empty resize target");
        return {layer.out_height, layer.out_width, a.channels};
    case LayerKind::Concat:
    case LayerKind::FfmFuse: {
        const TensorShape& b = in[1];
        if (a.height != b.height || a.width != b.width) invalid(layer, "inputs differ spatially");
        if (layer.kind == LayerKind::Concat) return {a.height, a.width, a.channels + b.channels};
        if (layer.out_channels == 0) invalid(layer, "zero output channels");
        return {a.height, a.width, layer.out_channels};
    }
    }
    invalid(layer, "unknown layer kind");
}

std::vector<TensorShape> input_shapes(const std::map<std::string, TensorShape>& shapes, const LayerSpec& layer) {
    std::vector<TensorShape> out;
    for (const auto& name : layer.inputs) {
        auto it = shapes.find(name);
        if (it == shapes.end()) {
            invalid(layer, "consumes undefined tensor \"" + name + "\"");
        }
        out.push_back(it->second);
    }
    return out;
}

std::uint64_t layer_macs(const LayerSpec& layer, const std::vector<TensorShape>& in, const TensorShape& out) {
    const std::uint64_t pixels = static_cast<std::uint64_t>(out.height) * out.width;
    const std::uint64_t k2 = static_cast<std::uint64_t>(layer.kernel) * layer.kernel;
    switch (layer.kind) {
    case LayerKind::Conv2d: return pixels * k2 * in[0].channels * out.channels;
    case LayerKind::DepthwiseConv2d: return pixels * k2 * out.channels;
    case LayerKind::PointwiseConv: return pixels * in[0].channels * out.channels;
    case LayerKind::FfmFuse: {
        const std::uint64_t cat = in[0].channels + in[1].channels;
        return pixels * (cat * out.channels + 9 * out.channels * out.channels);
    }
    default: return 0;
    }
}

// Deterministic across standard libraries: raw 64-bit draws mapped to [0, 1).
class UniformSource {
public:
    explicit UniformSource(std::uint64_t seed) : engine_(seed) {}

    float symmetric(double bound) {
        const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return static_cast<float>((2.0 * unit - 1.0) * bound);
    }

private:
    std::mt19937_64 engine_;
};

void fill(std::vector<float>& buffer, UniformSource& rng, double bound) {
    for (float& v : buffer) v = rng.symmetric(bound);
}

} // namespace

void NetworkGraph::validate() const {
    std::map<std::string, TensorShape> derived;
    if (input_name.empty() || input_shape.height == 0 || input_shape.width == 0 || input_shape.channels == 0) {
        throw Error(ErrorCode::InvalidGraph, "graph input is undefined");
    }
    derived[input_name] = input_shape;
    for (const auto& layer : layers) {
        const TensorShape out = infer_shape(layer, input_shapes(derived, layer));
        if (derived.count(layer.output)) {
            invalid(layer, "redefines tensor \"" + layer.output + "\"");
        }
        auto declared = shapes.find(layer.output);
        if (declared == shapes.end() || !(declared->second == out)) {
            invalid(layer, "declared shape disagrees with layer arithmetic");
        }
        derived[layer.output] = out;
    }
    if (!derived.count(output_name)) {
        throw Error(ErrorCode::InvalidGraph, "graph output \"" + output_name + "\" is never produced");
    }
}

GraphBuilder::GraphBuilder(std::string input_name, TensorShape input_shape) {
    graph_.input_name = std::move(input_name);
    graph_.input_shape = input_shape;
    graph_.shapes[graph_.input_name] = input_shape;
}

const TensorShape& GraphBuilder::shape(const std::string& tensor) const { return graph_.shapes.at(tensor); }

std::string GraphBuilder::add(LayerSpec spec) {
    if (spec.output.empty()) {
        spec.output = spec.name;
    }
    if (graph_.shapes.count(spec.output)) {
        invalid(spec, "redefines tensor \"" + spec.output + "\"");
    }
    graph_.shapes[spec.output] = infer_shape(spec, input_shapes(graph_.shapes, spec));
    graph_.layers.push_back(spec);
    return graph_.layers.back().output;
}

std::string GraphBuilder::conv2d(const std::string& name, const std::string& in, std::size_t out_channels,
                                 std::size_t kernel, std::size_t stride) {
    LayerSpec s{name, LayerKind::Conv2d, {in}, name, kernel, stride, out_channels};
    return add(s);
}

std::string GraphBuilder::depthwise(const std::string& name, const std::string& in, std::size_t kernel,
                                    std::size_t stride) {
    LayerSpec s{name, LayerKind::DepthwiseConv2d, {in}, name, kernel, stride};
    return add(s);
}

std::string GraphBuilder::pointwise(const std::string& name, const std::string& in, std::size_t out_channels) {
    LayerSpec s{name, LayerKind::PointwiseConv, {in}, name, 1, 1, out_channels};
    return add(s);
}

std::string GraphBuilder::activation(const std::string& name, LayerKind kind, const std::string& in) {
    LayerSpec s{name, kind, {in}, name};
    return add(s);
}

std::string GraphBuilder::avg_pool(const std::string& name, const std::string& in, std::size_t kernel,
                                   std::size_t stride) {
    LayerSpec s{name, LayerKind::AvgPool, {in}, name, kernel, stride};
    return add(s);
}

std::string GraphBuilder::resize(const std::string& name, LayerKind kind, const std::string& in, std::size_t out_h,
                                 std::size_t out_w) {
    LayerSpec s{name, kind, {in}, name};
    s.out_height = out_h;
    s.out_width = out_w;
    return add(s);
}

std::string GraphBuilder::concat(const std::string& name, const std::string& a, const std::string& b) {
    LayerSpec s{name, LayerKind::Concat, {a, b}, name};
    return add(s);
}

std::string GraphBuilder::ffm_fuse(const std::string& name, const std::string& decoder, const std::string& skip,
                                   std::size_t out_channels) {
    LayerSpec s{name, LayerKind::FfmFuse, {decoder, skip}, name, 3, 1, out_channels};
    graph_.skip_edges.emplace_back(skip, name);
    return add(s);
}

NetworkGraph GraphBuilder::finish(const std::string& output) {
    graph_.output_name = output;
    graph_.validate();
    return graph_;
}

std::vector<std::size_t> parameter_layout(const NetworkGraph& graph, const LayerSpec& layer) {
    const auto in = input_shapes(graph.shapes, layer);
    const std::size_t k2 = layer.kernel * layer.kernel;
    switch (layer.kind) {
    case LayerKind::Conv2d: return {k2 * in[0].channels * layer.out_channels, layer.out_channels};
    case LayerKind::DepthwiseConv2d: return {k2 * in[0].channels, in[0].channels};
    case LayerKind::PointwiseConv: return {in[0].channels * layer.out_channels, layer.out_channels};
    case LayerKind::FfmFuse: {
        const std::size_t cat = in[0].channels + in[1].channels;
        const std::size_t co = layer.out_channels;
        return {cat * co, co, 9 * co * co, co};
    }
    default: return {};
    }
}

WeightStore init_weights(const NetworkGraph& graph, std::uint64_t seed) {
    WeightStore store;
    store.seed = seed;
    UniformSource rng(seed);
    for (const auto& layer : graph.layers) {
        const auto layout = parameter_layout(graph, layer);
        std::vector<std::vector<float>> buffers;
        const auto in = input_shapes(graph.shapes, layer);
        // Fan-in of each (weight, bias) pair.
        std::vector<std::size_t> fan_in;
        switch (layer.kind) {
        case LayerKind::Conv2d: fan_in = {layer.kernel * layer.kernel * in[0].channels}; break;
        case LayerKind::DepthwiseConv2d: fan_in = {layer.kernel * layer.kernel}; break;
        case LayerKind::PointwiseConv: fan_in = {in[0].channels}; break;
        case LayerKind::FfmFuse: fan_in = {in[0].channels + in[1].channels, 9 * layer.out_channels}; break;
        default: break;
        }
        for (std::size_t i = 0; i < layout.size(); ++i) {
            std::vector<float> buffer(layout[i]);
            const double fan = static_cast<double>(fan_in[i / 2]);
            const double bound = (i % 2 == 0) ? std::sqrt(6.0 / fan) : 1.0 / std::sqrt(fan);
            fill(buffer, rng, bound);
            buffers.push_back(std::move(buffer));
        }
        store.layers.push_back(std::move(buffers));
    }
    return store;
}

ReferenceNet build_reference_net(std::uint64_t seed) {
    GraphBuilder b("image", {kNetInputHeight, kNetInputWidth, 3});
    const std::string small = b.resize("input_resize", LayerKind::ResizeBilinear, "image", kNetWorkHeight, kNetWorkWidth);

    // Inverted residual unit without the residual add: 1x1 expand, 3x3
    // depthwise, 1x1 linear projection.
    const auto unit = [&b](const std::string& prefix, std::string x, std::size_t expand, std::size_t out,
                           std::size_t stride) {
        x = b.pointwise(prefix + ".expand", x, expand);
        x = b.activation(prefix + ".expand_hswish", LayerKind::HardSwish, x);
        x = b.depthwise(prefix + ".dw", x, 3, stride);
        x = b.activation(prefix + ".dw_hswish", LayerKind::HardSwish, x);
        return b.pointwise(prefix + ".project", x, out);
    };

    std::string x = b.conv2d("enc1.stem", small, 16, 3, 2);
    x = b.activation("enc1.stem_hswish", LayerKind::HardSwish, x);
    const std::string e1 = unit("enc1.u1", x, 16, 16, 1);

    x = unit("enc2.u0", e1, 64, 24, 2);
    const std::string e2 = unit("enc2.u1", x, 72, 24, 1);

    x = unit("enc3.u0", e2, 72, 40, 2);
    x = unit("enc3.u1", x, 120, 40, 1);
    const std::string e3 = unit("enc3.u2", x, 120, 40, 1);

    x = unit("enc4.u0", e3, 240, 80, 2);
    x = unit("enc4.u1", x, 200, 80, 1);
    x = unit("enc4.u2", x, 184, 80, 1);
    const std::string e4 = unit("enc4.u3", x, 184, 80, 1);

    x = unit("enc5.u0", e4, 480, 112, 2);
    x = unit("enc5.u1", x, 672, 112, 1);

    const std::string skips[] = {e4, e3, e2, e1, small};
    const std::size_t widths[] = {160, 128, 64, 32, 16};
    for (std::size_t s = 0; s < 5; ++s) {
        const std::string stage = "dec" + std::to_string(s + 1);
        const TensorShape& target = b.shape(skips[s]);
        x = b.resize(stage + ".up", LayerKind::ResizeNearest, x, target.height, target.width);
        x = b.ffm_fuse(stage + ".ffm", x, skips[s], widths[s]);
    }

    x = b.pointwise("head.conv", x, 1);
    x = b.activation("head.softplus", LayerKind::Softplus, x);
    x = b.resize("head.resize", LayerKind::ResizeNearest, x, kNetInputHeight, kNetInputWidth);

    ReferenceNet net;
    net.graph = b.finish(x);
    net.weights = init_weights(net.graph, seed);
    return net;
}

ParamStats param_stats(const NetworkGraph& graph, const WeightStore& weights) {
    if (weights.layers.size() != graph.layers.size()) {
        throw Error(ErrorCode::InvalidGraph, "weight store does not match graph");
    }
    ParamStats stats;
    for (const auto& layer : graph.layers) {
        const auto in = input_shapes(graph.shapes, layer);
        const TensorShape out = graph.shapes.at(layer.output);
        LayerStats row{layer.name, layer.kind, 0, layer_macs(layer, in, out)};
        for (std::size_t n : parameter_layout(graph, layer)) {
            row.parameters += n;
        }
        stats.parameter_count += row.parameters;
        stats.total_macs += row.macs;
        stats.layers.push_back(row);
    }
    stats.fp32_size_bytes = 4 * stats.parameter_count;
    return stats;
}

namespace {

Tensor to_tensor(const RgbImage& rgb) {
    Tensor t(rgb.height, rgb.width, 3);
    for (std::size_t i = 0; i < rgb.values.size(); ++i) {
        t.data[i] = static_cast<float>(rgb.values[i]) / 255.0f;
    }
    return t;
}

void check_weights(const NetworkGraph& graph, const WeightStore& weights) {
    if (weights.layers.size() != graph.layers.size()) {
        throw Error(ErrorCode::InvalidGraph, "weight store does not match graph");
    }
    for (std::size_t i = 0; i < graph.layers.size(); ++i) {
        const auto layout = parameter_layout(graph, graph.layers[i]);
        const auto& buffers = weights.layers[i];
        bool ok = buffers.size() == layout.size();
        for (std::size_t j = 0; ok && j < layout.size(); ++j) {
            ok = buffers[j].size() == layout[j];
        }
        if (!ok) {
            throw Error(ErrorCode::InvalidGraph, graph.layers[i].name + ": weight buffers do not match layer spec");
        }
    }
}

} // namespace

MetricDepthField forward(const NetworkGraph& graph, const WeightStore& weights, const RgbImage& rgb,
                         std::size_t threads) {
    WorkerPool pool(threads);
    return forward(graph, weights, rgb, pool);
}

MetricDepthField forward(const NetworkGraph& graph, const WeightStore& weights, const RgbImage& rgb,
                         WorkerPool& pool) {
    if (rgb.height != graph.input_shape.height || rgb.width != graph.input_shape.width ||
        graph.input_shape.channels != 3 || rgb.values.size() != rgb.width * rgb.height * 3) {
        throw Error(ErrorCode::WrongInputShape, "expected " + std::to_string(graph.input_shape.width) + "x" +
                                                    std::to_string(graph.input_shape.height) + "x3, got " +
                                                    std::to_string(rgb.width) + "x" + std::to_string(rgb.height));
    }
    check_weights(graph, weights);

    // Drop each tensor after its last consumer.
    std::unordered_map<std::string, std::size_t> last_use;
    for (std::size_t i = 0; i < graph.layers.size(); ++i) {
        for (const auto& in : graph.layers[i].inputs) last_use[in] = i;
    }

    std::unordered_map<std::string, Tensor> env;
    env[graph.input_name] = to_tensor(rgb);
    WorkerPool* p = &pool;
    for (std::size_t i = 0; i < graph.layers.size(); ++i) {
        const LayerSpec& layer = graph.layers[i];
        const auto& w = weights.layers[i];
        const Tensor& a = env.at(layer.inputs[0]);
        Tensor out;
        switch (layer.kind) {
        case LayerKind::Conv2d: out = conv2d(a, w[0], w[1], layer.kernel, layer.stride, layer.out_channels, p); break;
        case LayerKind::DepthwiseConv2d: out = depthwise_conv2d(a, w[0], w[1], layer.kernel, layer.stride, p); break;
        case LayerKind::PointwiseConv: out = pointwise_conv(a, w[0], w[1], layer.out_channels, p); break;
        case LayerKind::HardSwish: out = a; hard_swish_inplace(out); break;
        case LayerKind::Relu: out = a; relu_inplace(out); break;
        case LayerKind::Softplus: out = a; softplus_inplace(out); break;
        case LayerKind::AvgPool: out = avg_pool(a, layer.kernel, layer.stride); break;
        case LayerKind::ResizeNearest: out = resize_nearest(a, layer.out_height, layer.out_width, p); break;
        case LayerKind::ResizeBilinear: out = resize_bilinear(a, layer.out_height, layer.out_width, p); break;
        case LayerKind::Concat: out = concat_channels(a, env.at(layer.inputs[1])); break;
        case LayerKind::FfmFuse: {
            const Tensor cat = concat_channels(a, env.at(layer.inputs[1]));
            const Tensor mixed = pointwise_conv(cat, w[0], w[1], layer.out_channels, p);
            out = conv2d(mixed, w[2], w[3], 3, 1, layer.out_channels, p);
            relu_inplace(out);
            break;
        }
        }
        const TensorShape declared = graph.shapes.at(layer.output);
        if (!(declared == TensorShape{out.height, out.width, out.channels})) {
            throw Error(ErrorCode::InvalidGraph, layer.name + ": runtime shape differs from declared shape");
        }
        for (const auto& in : layer.inputs) {
            if (last_use[in] == i && in != graph.output_name) env.erase(in);
        }
        env[layer.output] = std::move(out);
    }

    const Tensor& result = env.at(graph.output_name);
    MetricDepthField field;
    field.height = result.height;
    field.width = result.width;
    field.depth_m.resize(result.height * result.width);
    field.mask.assign(field.depth_m.size(), true);
    for (std::size_t i = 0; i < field.depth_m.size(); ++i) {
        field.depth_m[i] = static_cast<double>(result.data[i * result.channels]);
    }
    return field;
}

std::string to_json(const ParamStats& stats) {
    nlohmann::ordered_json j;
    j["parameter_count"] = stats.parameter_count;
    j["fp32_size_bytes"] = stats.fp32_size_bytes;
    j["fp32_size_mib"] = stats.fp32_size_mib();
    j["total_macs"] = stats.total_macs;
    auto layers = nlohmann::ordered_json::array();
    for (const auto& l : stats.layers) {
        layers.push_back({{"name", l.name}, {"kind", to_string(l.kind)}, {"parameters", l.parameters}, {"macs", l.macs}});
    }
    j["layers"] = std::move(layers);
    return j.dump(2);
}

} // namespace depthbench
