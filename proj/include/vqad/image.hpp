#pragma once

// Float images in [0, 1] and PNG input/output through libpng.

#include "vqad/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace vqad {

struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<float> data;  // row-major, interleaved channels

    Image() = default;
    Image(int w, int h, int c, float fill = 0.0f)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

    float& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    float at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace detail

/// Reads an 8- or 16-bit PNG. Palette and gray inputs are expanded; the
/// channel count of the result is 1, 3 or 4.
inline Image read_png(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, detail::FileCloser> file(std::fopen(path.string().c_str(), "rb"));
    if (!file) throw FormatError("cannot open " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("libpng initialization failed");
    }
    Image img;
    std::vector<png_bytep> rows;
    std::vector<std::uint8_t> buffer;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("invalid PNG: " + path.string());
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (png_get_bit_depth(png, info) == 16) png_set_swap(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int depth = png_get_bit_depth(png, info);
    const int channels = png_get_channels(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    buffer.resize(stride * h);
    rows.resize(h);
    for (int y = 0; y < h; ++y) rows[y] = buffer.data() + y * stride;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    img = Image(w, h, channels);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w * channels; ++x) {
            float v;
            if (depth == 16) {
                std::uint16_t raw;
                std::memcpy(&raw, rows[y] + 2 * x, 2);
                v = raw / 65535.0f;
            } else {
                v = rows[y][x] / 255.0f;
            }
            img.data[static_cast<std::size_t>(y) * w * channels + x] = v;
        }
    }
    return img;
}

/// Writes an 8-bit RGB (or gray) PNG, clamping to [0, 1].
inline void write_png(const std::filesystem::path& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3) throw FormatError("write_png: expects 1 or 3 channels");
    std::unique_ptr<std::FILE, detail::FileCloser> file(std::fopen(path.string().c_str(), "wb"));
    if (!file) throw FormatError("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("libpng initialization failed");
    }
    std::vector<std::uint8_t> buffer(static_cast<std::size_t>(img.width) * img.height * img.channels);
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        buffer[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
    }
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) rows[y] = buffer.data() + static_cast<std::size_t>(y) * img.width * img.channels;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("failed writing PNG: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, img.width, img.height, 8, img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// RGB over a constant background using the alpha channel when present.
inline Image premultiply_over(const Image& src, const float background[3]) {
    Image out(src.width, src.height, 3);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            const bool gray = src.channels < 3;
            const float a = src.channels == 4 ? src.at(x, y, 3) : 1.0f;
            for (int c = 0; c < 3; ++c) {
                const float v = src.at(x, y, gray ? 0 : c);
                out.at(x, y, c) = v * a + background[c] * (1.0f - a);
            }
        }
    }
    return out;
}

}  // namespace vqad
