#include "png_codec.hpp"

#include "depthbench/error.hpp"

#include <png.h>

#include <array>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>

namespace depthbench::png {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct ErrorSink {
    char message[256] = {0};
};

void on_error(png_structp png_ptr, png_const_charp msg) {
    auto* sink = static_cast<ErrorSink*>(png_get_error_ptr(png_ptr));
    if (sink) {
        std::snprintf(sink->message, sizeof(sink->message), "%s", msg);
    }
    png_longjmp(png_ptr, 1);
}

void on_warning(png_structp, png_const_charp) {}

bool host_is_little_endian() {
    const std::uint16_t probe = 1;
    std::uint8_t first = 0;
    std::memcpy(&first, &probe, 1);
    return first == 1;
}

// Everything touched between setjmp and a possible longjmp is plain data owned
// by the caller, so no destructors are skipped.
bool read_png(std::FILE* fp, DecodedImage& out, std::vector<png_bytep>& rows, ErrorSink& sink) {
    png_structp png_ptr = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, on_error, on_warning);
    if (!png_ptr) {
        return false;
    }
    png_infop info_ptr = png_create_info_struct(png_ptr);
    if (!info_ptr) {
        png_destroy_read_struct(&png_ptr, nullptr, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png_ptr))) {
        png_destroy_read_struct(&png_ptr, &info_ptr, nullptr);
        return false;
    }

    png_init_io(png_ptr, fp);
    png_set_sig_bytes(png_ptr, 8);
    png_read_info(png_ptr, info_ptr);

    out.width = png_get_image_width(png_ptr, info_ptr);
    out.height = png_get_image_height(png_ptr, info_ptr);
    out.bit_depth = png_get_bit_depth(png_ptr, info_ptr);
    out.channels = png_get_channels(png_ptr, info_ptr);
    out.palette = png_get_color_type(png_ptr, info_ptr) == PNG_COLOR_TYPE_PALETTE;

    if (out.bit_depth == 16 && host_is_little_endian()) {
        png_set_swap(png_ptr);
    }
    png_set_interlace_handling(png_ptr);
    png_read_update_info(png_ptr, info_ptr);

    const std::size_t row_bytes = png_get_rowbytes(png_ptr, info_ptr);
    out.samples.resize(row_bytes * out.height);
    rows.resize(out.height);
    for (std::size_t y = 0; y < out.height; ++y) {
        rows[y] = out.samples.data() + y * row_bytes;
    }
    png_read_image(png_ptr, rows.data());
    png_read_end(png_ptr, nullptr);
    png_destroy_read_struct(&png_ptr, &info_ptr, nullptr);
    return true;
}

bool write_png(std::FILE* fp, std::size_t width, std::size_t height, int bit_depth, int channels,
               std::vector<png_bytep>& rows, ErrorSink& sink) {
    png_structp png_ptr = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, on_error, on_warning);
    if (!png_ptr) {
        return false;
    }
    png_infop info_ptr = png_create_info_struct(png_ptr);
    if (!info_ptr) {
        png_destroy_write_struct(&png_ptr, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png_ptr))) {
        png_destroy_write_struct(&png_ptr, &info_ptr);
        return false;
    }
    png_init_io(png_ptr, fp);
    const int color_type = channels == 1   ? PNG_COLOR_TYPE_GRAY
                           : channels == 2 ? PNG_COLOR_TYPE_GRAY_ALPHA
                           : channels == 3 ? PNG_COLOR_TYPE_RGB
                                           : PNG_COLOR_TYPE_RGB_ALPHA;
    png_set_IHDR(png_ptr, info_ptr, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png_ptr, info_ptr);
    if (bit_depth == 16 && host_is_little_endian()) {
        png_set_swap(png_ptr);
    }
    png_write_image(png_ptr, rows.data());
    png_write_end(png_ptr, nullptr);
    png_destroy_write_struct(&png_ptr, &info_ptr);
    return true;
}

} // namespace

DecodedImage decode_file(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw Error(ErrorCode::NotFound, path.string());
    }
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) {
        throw Error(ErrorCode::NotFound, path.string());
    }
    std::array<png_byte, 8> signature{};
    if (std::fread(signature.data(), 1, signature.size(), fp.get()) != signature.size() ||
        png_sig_cmp(signature.data(), 0, signature.size()) != 0) {
        throw Error(ErrorCode::NotPng, path.string());
    }

    DecodedImage image;
    std::vector<png_bytep> rows;
    ErrorSink sink;
    if (!read_png(fp.get(), image, rows, sink)) {
        throw Error(ErrorCode::NotPng, path.string() + ": " + sink.message);
    }
    return image;
}

void encode_file(const std::filesystem::path& path, std::size_t width, std::size_t height,
                 int bit_depth, int channels, const std::uint8_t* samples) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) {
        throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
    }
    const std::size_t row_bytes = width * static_cast<std::size_t>(channels) * (bit_depth / 8);
    // libpng takes non-const row pointers even when writing.
    std::vector<png_bytep> rows(height);
    for (std::size_t y = 0; y < height; ++y) {
        rows[y] = const_cast<png_bytep>(samples + y * row_bytes);
    }
    ErrorSink sink;
    if (!write_png(fp.get(), width, height, bit_depth, channels, rows, sink)) {
        throw Error(ErrorCode::IoError, path.string() + ": " + sink.message);
    }
    if (std::fflush(fp.get()) != 0) {
        throw Error(ErrorCode::IoError, "write failed: " + path.string());
    }
}

} // namespace depthbench::png
