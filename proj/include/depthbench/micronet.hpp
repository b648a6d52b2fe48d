#pragma once

#include "depthbench/dataset_io.hpp"
#include "depthbench/kernels.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace depthbench {

enum class LayerKind {
    Conv2d,
    DepthwiseConv2d,
    PointwiseConv,
    HardSwish,
    Relu,
    Softplus,
    AvgPool,
    ResizeNearest,
    ResizeBilinear,
    Concat,
    // concat(decoder, skip) -> 1x1 conv -> 3x3 conv -> relu
    FfmFuse,
};

const char* to_string(LayerKind kind);

struct TensorShape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;

    bool operator==(const TensorShape&) const = default;
};

struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::Relu;
    std::vector<std::string> inputs;
    std::string output;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t out_channels = 0;  // conv layers and FfmFuse
    std::size_t out_height = 0;    // resizes
    std::size_t out_width = 0;
};

/// Declarative layer list over named tensors. Shapes are declared at build
/// time and re-derived by validate().
struct NetworkGraph {
    std::string input_name;
    TensorShape input_shape;
    std::string output_name;
    std::vector<LayerSpec> layers;
    std::map<std::string, TensorShape> shapes;
    /// (encoder tensor, consuming fusion layer) pairs.
    std::vector<std::pair<std::string, std::string>> skip_edges;

    /// Throws Error(InvalidGraph) on use-before-definition, redefinition or
    /// a declared shape that disagrees with the layer arithmetic.
    void validate() const;

    TensorShape output_shape() const { return shapes.at(output_name); }
};

/// Per-layer parameter buffers (weights then bias; FfmFuse carries two pairs).
struct WeightStore {
    std::uint64_t seed = 0;
    std::vector<std::vector<std::vector<float>>> layers;

    bool operator==(const WeightStore&) const = default;
};

struct LayerStats {
    std::string name;
    LayerKind kind;
    std::size_t parameters = 0;
    std::uint64_t macs = 0;
};

struct ParamStats {
    std::size_t parameter_count = 0;
    std::size_t fp32_size_bytes = 0;
    std::uint64_t total_macs = 0;
    std::vector<LayerStats> layers;

    double fp32_size_mib() const { return static_cast<double>(fp32_size_bytes) / (1024.0 * 1024.0); }
};

struct ReferenceNet {
    NetworkGraph graph;
    WeightStore weights;
};

/// Incrementally builds a graph, inferring and recording each output shape.
class GraphBuilder {
public:
    GraphBuilder(std::string input_name, TensorShape input_shape);

    const TensorShape& shape(const std::string& tensor) const;

    std::string conv2d(const std::string& name, const std::string& in, std::size_t out_channels,
                       std::size_t kernel, std::size_t stride);
    std::string depthwise(const std::string& name, const std::string& in, std::size_t kernel, std::size_t stride);
    std::string pointwise(const std::string& name, const std::string& in, std::size_t out_channels);
    std::string activation(const std::string& name, LayerKind kind, const std::string& in);
    std::string avg_pool(const std::string& name, const std::string& in, std::size_t kernel, std::size_t stride);
    std::string resize(const std::string& name, LayerKind kind, const std::string& in, std::size_t out_h,
                       std::size_t out_w);
    std::string concat(const std::string& name, const std::string& a, const std::string& b);
    std::string ffm_fuse(const std::string& name, const std::string& decoder, const std::string& skip,
                         std::size_t out_channels);

    NetworkGraph finish(const std::string& output);

private:
    std::string add(LayerSpec spec);

    NetworkGraph graph_;
};

/// Buffer sizes each layer expects, in order (weights, bias, ...).
std::vector<std::size_t> parameter_layout(const NetworkGraph& graph, const LayerSpec& layer);

/// He-uniform weights and fan-in-scaled uniform biases from a seeded generator.
WeightStore init_weights(const NetworkGraph& graph, std::uint64_t seed);

inline constexpr std::size_t kNetInputHeight = 480;
inline constexpr std::size_t kNetInputWidth = 640;
inline constexpr std::size_t kNetWorkHeight = 128;
inline constexpr std::size_t kNetWorkWidth = 160;

/// Five depthwise-separable encoder blocks on a 160x128 working copy of the
/// input, five nearest-upsample + fusion decoder stages, a softplus head and
/// a final nearest resize back to 640x480.
ReferenceNet build_reference_net(std::uint64_t seed);

ParamStats param_stats(const NetworkGraph& graph, const WeightStore& weights);

/// Runs the graph on an RGB image scaled to [0, 1]. Throws
/// Error(WrongInputShape) unless the image matches the graph input.
MetricDepthField forward(const NetworkGraph& graph, const WeightStore& weights, const RgbImage& rgb,
                         std::size_t threads = 1);

/// As above, reusing a caller-owned pool.
MetricDepthField forward(const NetworkGraph& graph, const WeightStore& weights, const RgbImage& rgb,
                         WorkerPool& pool);

std::string to_json(const ParamStats& stats);

} // namespace depthbench
