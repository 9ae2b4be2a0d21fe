#include "mirage/image_io.hpp"

#include <png.h>

#include <cmath>
#include <fstream>
#include <iterator>

#include "mirage/error.hpp"

namespace mirage {
namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::validation, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::validation, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> decode_raw(const std::vector<std::uint8_t>& bytes, std::uint32_t format,
                                     std::size_t& height, std::size_t& width) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw Error(ErrorKind::validation, std::string("invalid PNG: ") + image.message);
    }
    image.format = format;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        png_image_free(&image);
        throw Error(ErrorKind::validation, std::string("invalid PNG: ") + image.message);
    }
    height = image.height;
    width = image.width;
    return buffer;
}

std::vector<std::uint8_t> encode_raw(const std::uint8_t* pixels, std::size_t height, std::size_t width,
                                     std::uint32_t format) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels, 0, nullptr)) {
        throw Error(ErrorKind::validation, std::string("PNG encode failed: ") + image.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0, nullptr)) {
        throw Error(ErrorKind::validation, std::string("PNG encode failed: ") + image.message);
    }
    out.resize(size);
    return out;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(v * 255.0)); }

}  // namespace

std::size_t PixelMask::count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
}

std::vector<std::uint8_t> encode_png(const PixelImage& image) {
    const std::size_t h = image.height();
    const std::size_t w = image.width();
    std::vector<std::uint8_t> interleaved(3 * h * w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) interleaved[(y * w + x) * 3 + c] = to_byte(image.at(c, y, x));
        }
    }
    return encode_raw(interleaved.data(), h, w, PNG_FORMAT_RGB);
}

PixelImage decode_png(const std::vector<std::uint8_t>& bytes) {
    std::size_t h = 0;
    std::size_t w = 0;
    const auto raw = decode_raw(bytes, PNG_FORMAT_RGB, h, w);
    std::vector<double> planar(3 * h * w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) planar[(c * h + y) * w + x] = raw[(y * w + x) * 3 + c] / 255.0;
        }
    }
    return PixelImage(h, w, std::move(planar));
}

PixelImage read_png(const std::filesystem::path& path) { return decode_png(read_file(path)); }

void write_png(const std::filesystem::path& path, const PixelImage& image) { write_file(path, encode_png(image)); }

std::vector<std::uint8_t> encode_mask_png(const PixelMask& mask) {
    std::vector<std::uint8_t> gray(mask.bits.size());
    for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = mask.bits[i] ? 255 : 0;
    return encode_raw(gray.data(), mask.height, mask.width, PNG_FORMAT_GRAY);
}

PixelMask decode_mask_png(const std::vector<std::uint8_t>& bytes) {
    std::size_t h = 0;
    std::size_t w = 0;
    const auto raw = decode_raw(bytes, PNG_FORMAT_GRAY, h, w);
    PixelMask mask(h, w);
    for (std::size_t i = 0; i < raw.size(); ++i) mask.bits[i] = raw[i] ? 1 : 0;
    return mask;
}

PixelMask read_mask_png(const std::filesystem::path& path) { return decode_mask_png(read_file(path)); }

void write_mask_png(const std::filesystem::path& path, const PixelMask& mask) {
    write_file(path, encode_mask_png(mask));
}

PixelImage quantize8(const PixelImage& image) {
    std::vector<double> values(image.values().begin(), image.values().end());
    for (double& v : values) v = to_byte(v) / 255.0;
    return PixelImage(image.height(), image.width(), std::move(values));
}

}  // namespace mirage
