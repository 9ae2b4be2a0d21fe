#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mirage/tensor.hpp"

namespace mirage {

/// Pixel-resolution binary bitmap (ground-truth masks, segmenter output).
struct PixelMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> bits;

    PixelMask() = default;
    PixelMask(std::size_t h, std::size_t w, bool fill = false) : height(h), width(w), bits(h * w, fill ? 1 : 0) {}

    bool at(std::size_t y, std::size_t x) const { return bits[y * width + x] != 0; }
    void set(std::size_t y, std::size_t x, bool v) { bits[y * width + x] = v ? 1 : 0; }
    std::size_t count() const;
    bool operator==(const PixelMask&) const = default;
};

// 8-bit RGB PNG. Reading accepts gray, palette, alpha and 16-bit inputs and
// converts them; writing quantizes with round(v * 255).
PixelImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const PixelImage& image);

std::vector<std::uint8_t> encode_png(const PixelImage& image);
PixelImage decode_png(const std::vector<std::uint8_t>& bytes);

/// Masks are stored as 8-bit grayscale PNG; any nonzero value is set.
PixelMask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const PixelMask& mask);
std::vector<std::uint8_t> encode_mask_png(const PixelMask& mask);
PixelMask decode_mask_png(const std::vector<std::uint8_t>& bytes);

/// Quantize to the 8-bit grid and back, exactly what a PNG round trip does.
PixelImage quantize8(const PixelImage& image);

}  // namespace mirage
