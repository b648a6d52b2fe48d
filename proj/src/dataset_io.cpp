#include "depthbench/dataset_io.hpp"

#include "depthbench/error.hpp"
#include "png_codec.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace depthbench {

const char* to_string(Split split) {
    switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "train";
}

const char* to_string(FindingKind kind) {
    switch (kind) {
    case FindingKind::DimensionMismatch: return "DimensionMismatch";
    case FindingKind::NonVgaResolution: return "NonVgaResolution";
    case FindingKind::InvalidPixels: return "InvalidPixels";
    }
    return "Unknown";
}

bool ValidationReport::ok() const {
    return std::none_of(findings.begin(), findings.end(),
                        [](const Finding& f) { return f.severity == Severity::Error; });
}

bool ValidationReport::has(FindingKind kind) const {
    return std::any_of(findings.begin(), findings.end(),
                       [kind](const Finding& f) { return f.kind == kind; });
}

DepthMap load_depth_png(const std::filesystem::path& path, double unit_scale) {
    if (!(unit_scale > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "unit_scale must be positive");
    }
    png::DecodedImage image = png::decode_file(path);
    if (image.palette || image.channels != 1) {
        throw Error(ErrorCode::WrongChannelCount,
                    path.string() + ": expected 1 channel, got " + std::to_string(image.channels));
    }
    if (image.bit_depth != 16) {
        throw Error(ErrorCode::WrongBitDepth,
                    path.string() + ": expected 16-bit, got " + std::to_string(image.bit_depth));
    }
    DepthMap map;
    map.width = image.width;
    map.height = image.height;
    map.unit_scale = unit_scale;
    map.values.resize(map.size());
    std::memcpy(map.values.data(), image.samples.data(), map.size() * sizeof(std::uint16_t));
    return map;
}

RgbImage load_rgb_png(const std::filesystem::path& path) {
    png::DecodedImage image = png::decode_file(path);
    if (image.palette || image.channels != 3) {
        throw Error(ErrorCode::WrongChannelCount,
                    path.string() + ": expected 3 channels, got " + std::to_string(image.channels));
    }
    if (image.bit_depth != 8) {
        throw Error(ErrorCode::WrongBitDepth,
                    path.string() + ": expected 8-bit, got " + std::to_string(image.bit_depth));
    }
    RgbImage rgb;
    rgb.width = image.width;
    rgb.height = image.height;
    rgb.values = std::move(image.samples);
    return rgb;
}

void save_depth_png(const std::filesystem::path& path, const DepthMap& map) {
    if (map.values.size() != map.size() || map.size() == 0) {
        throw Error(ErrorCode::DimensionMismatch, "depth map buffer does not match its dimensions");
    }
    png::encode_file(path, map.width, map.height, 16, 1,
                     reinterpret_cast<const std::uint8_t*>(map.values.data()));
}

void save_rgb_png(const std::filesystem::path& path, const RgbImage& image) {
    if (image.values.size() != image.width * image.height * 3 || image.values.empty()) {
        throw Error(ErrorCode::DimensionMismatch, "rgb buffer does not match its dimensions");
    }
    png::encode_file(path, image.width, image.height, 8, 3, image.values.data());
}

MetricDepthField to_metric_depth(const DepthMap& map) {
    MetricDepthField field;
    field.width = map.width;
    field.height = map.height;
    field.depth_m.resize(map.size());
    field.mask.resize(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
        field.depth_m[i] = static_cast<double>(map.values[i]) * map.unit_scale;
        field.mask[i] = map.values[i] > 0;
    }
    return field;
}

DepthMap from_metric_depth(const MetricDepthField& field, double unit_scale) {
    DepthMap map;
    map.width = field.width;
    map.height = field.height;
    map.unit_scale = unit_scale;
    map.values.resize(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) {
        if (!field.mask[i]) {
            continue;
        }
        const double raw = std::round(field.depth_m[i] / unit_scale);
        map.values[i] = static_cast<std::uint16_t>(std::clamp(raw, 1.0, 65535.0));
    }
    return map;
}

ValidationReport validate_pair(const RgbImage& rgb, const DepthMap& depth) {
    ValidationReport report;
    if (rgb.width != depth.width || rgb.height != depth.height) {
        std::ostringstream msg;
        msg << "rgb " << rgb.width << "x" << rgb.height << " vs depth " << depth.width << "x"
            << depth.height;
        report.findings.push_back({FindingKind::DimensionMismatch, Severity::Error, msg.str()});
    }
    const auto non_vga = [](std::size_t w, std::size_t h) { return w != kVgaWidth || h != kVgaHeight; };
    if (non_vga(rgb.width, rgb.height) || non_vga(depth.width, depth.height)) {
        report.findings.push_back({FindingKind::NonVgaResolution, Severity::Warning,
                                   "expected 640x480 inputs"});
    }
    if (depth.size() > 0) {
        const auto invalid = static_cast<std::size_t>(
            std::count(depth.values.begin(), depth.values.end(), std::uint16_t{0}));
        report.invalid_fraction = static_cast<double>(invalid) / static_cast<double>(depth.size());
        if (invalid == depth.size()) {
            report.findings.push_back({FindingKind::InvalidPixels, Severity::Error,
                                       "depth map has no valid pixels"});
        }
    }
    return report;
}

namespace {

Split parse_split(const std::string& s, std::size_t line) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw ParseError(line, "unknown split \"" + s + "\"");
}

std::string require_path(const nlohmann::json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        throw ParseError(line, std::string("missing string key \"") + key + "\"");
    }
    auto value = it->get<std::string>();
    if (value.empty()) {
        throw ParseError(line, std::string("empty \"") + key + "\"");
    }
    return value;
}

} // namespace

DatasetManifest parse_manifest(const std::string& text) {
    DatasetManifest manifest;
    std::unordered_set<std::string> seen;
    std::istringstream in(text);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (!raw.empty() && raw.back() == '\r') {
            raw.pop_back();
        }
        if (raw.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(raw);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(line, e.what());
        }
        if (!obj.is_object()) {
            throw ParseError(line, "expected a JSON object");
        }
        ManifestEntry entry;
        entry.rgb_path = require_path(obj, "rgb", line);
        entry.depth_path = require_path(obj, "depth", line);
        auto split = obj.find("split");
        if (split == obj.end() || !split->is_string()) {
            throw ParseError(line, "missing string key \"split\"");
        }
        entry.split = parse_split(split->get<std::string>(), line);
        if (auto scale = obj.find("unit_scale"); scale != obj.end()) {
            if (!scale->is_number() || !(scale->get<double>() > 0.0)) {
                throw ParseError(line, "unit_scale must be a positive number");
            }
            entry.unit_scale = scale->get<double>();
        }
        if (!seen.insert(entry.rgb_path).second) {
            throw Error(ErrorCode::DuplicateEntry,
                        "line " + std::to_string(line) + ": " + entry.rgb_path);
        }
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::NotFound, path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_manifest(buffer.str());
}

} // namespace depthbench
