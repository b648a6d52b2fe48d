#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace depthbench {

inline constexpr double kDefaultUnitScale = 0.001;  // millimeters
inline constexpr std::size_t kVgaWidth = 640;
inline constexpr std::size_t kVgaHeight = 480;

/// 16-bit depth raster. Raw value 0 marks a pixel the sensor could not measure.
struct DepthMap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint16_t> values;  // row-major
    double unit_scale = kDefaultUnitScale;  // meters per raw unit

    std::size_t size() const { return width * height; }
    bool valid(std::size_t i) const { return values[i] > 0; }
};

struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> values;  // row-major, interleaved RGB

    static constexpr std::size_t channels = 3;
};

/// Float view of a depth raster, in meters.
struct MetricDepthField {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> depth_m;
    std::vector<bool> mask;

    std::size_t size() const { return width * height; }
};

enum class Split { Train, Val, Test };

const char* to_string(Split split);

struct ManifestEntry {
    std::string rgb_path;
    std::string depth_path;
    Split split = Split::Train;
    double unit_scale = kDefaultUnitScale;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
};

enum class FindingKind { DimensionMismatch, NonVgaResolution, InvalidPixels };
enum class Severity { Warning, Error };

struct Finding {
    FindingKind kind;
    Severity severity;
    std::string message;
};

struct ValidationReport {
    std::vector<Finding> findings;
    double invalid_fraction = 0.0;

    bool ok() const;
    bool has(FindingKind kind) const;
};

const char* to_string(FindingKind kind);

// Throws Error with NotFound / NotPng / WrongBitDepth / WrongChannelCount.
DepthMap load_depth_png(const std::filesystem::path& path, double unit_scale = kDefaultUnitScale);
RgbImage load_rgb_png(const std::filesystem::path& path);

void save_depth_png(const std::filesystem::path& path, const DepthMap& map);
void save_rgb_png(const std::filesystem::path& path, const RgbImage& image);

MetricDepthField to_metric_depth(const DepthMap& map);

/// Quantizes metric depth back to raw units; values are rounded and clamped
/// to [1, 65535] where the mask is set, 0 elsewhere.
DepthMap from_metric_depth(const MetricDepthField& field, double unit_scale = kDefaultUnitScale);

ValidationReport validate_pair(const RgbImage& rgb, const DepthMap& depth);

/// One JSON object per line: {"rgb": ..., "depth": ..., "split": ..., "unit_scale": ...}.
/// Blank lines are skipped. Throws ParseError (with line number) or
/// Error(DuplicateEntry).
DatasetManifest parse_manifest(const std::string& text);
DatasetManifest load_manifest(const std::filesystem::path& path);

} // namespace depthbench
