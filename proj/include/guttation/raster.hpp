#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "guttation/color.hpp"

namespace guttation {

/// 8-bit interleaved RGB image, row-major, no padding.
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    Raster() = default;
    Raster(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t* at(int x, int y) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* at(int x, int y) const {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    Color color(int x, int y) const {
        const auto* p = at(x, y);
        return Color::from_bytes(p[0], p[1], p[2]);
    }
    void fill(const Color& c);

    friend bool operator==(const Raster&, const Raster&) = default;
};

/// PNG or JPEG; EXIF orientation is applied. Throws Error(ImageDecodeError).
Raster decode_image(std::span<const std::uint8_t> bytes);
Raster read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Raster& image);
std::vector<std::uint8_t> encode_jpeg(const Raster& image, int quality = 90);
void write_png(const std::filesystem::path& path, const Raster& image);

/// Reads a whole file; throws Error(IoError).
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace guttation
