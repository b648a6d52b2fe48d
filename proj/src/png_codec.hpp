#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace depthbench::png {

struct DecodedImage {
    std::size_t width = 0;
    std::size_t height = 0;
    int bit_depth = 0;
    int channels = 0;
    bool palette = false;
    // 8-bit: one byte per sample. 16-bit: host-order uint16 packed as two bytes.
    std::vector<std::uint8_t> samples;
};

DecodedImage decode_file(const std::filesystem::path& path);

void encode_file(const std::filesystem::path& path, std::size_t width, std::size_t height,
                 int bit_depth, int channels, const std::uint8_t* samples);

} // namespace depthbench::png
