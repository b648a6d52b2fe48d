#pragma once

#include "depthbench/dataset_io.hpp"
#include "depthbench/losses.hpp"

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

namespace depthbench::testing {

/// Scratch directory removed on scope exit.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("depthbench-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline MetricDepthField make_field(std::size_t w, std::size_t h, std::vector<double> depth) {
    MetricDepthField f;
    f.width = w;
    f.height = h;
    f.mask.resize(depth.size());
    for (std::size_t i = 0; i < depth.size(); ++i) f.mask[i] = depth[i] > 0.0;
    f.depth_m = std::move(depth);
    return f;
}

/// Random depth in [lo, hi] with roughly `invalid` of the pixels zeroed.
inline MetricDepthField random_field(std::mt19937_64& rng, std::size_t w, std::size_t h, double invalid = 0.0,
                                     double lo = 0.5, double hi = 40.0) {
    std::uniform_real_distribution<double> depth(lo, hi);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(w * h);
    for (auto& x : v) x = u(rng) < invalid ? 0.0 : depth(rng);
    return make_field(w, h, std::move(v));
}

inline Field random_raster(std::mt19937_64& rng, std::size_t h, std::size_t w, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Field f(h, w);
    for (auto& v : f.values) v = u(rng);
    return f;
}

inline FeatureMap random_features(std::mt19937_64& rng, std::size_t h, std::size_t w, std::size_t c) {
    std::normal_distribution<double> n(0.0, 1.0);
    FeatureMap f(h, w, c);
    for (auto& v : f.values) v = n(rng);
    return f;
}

} // namespace depthbench::testing
