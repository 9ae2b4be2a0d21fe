#include "mirage/tensor.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mirage/error.hpp"

namespace mirage {
namespace {

void require_shape(GridShape shape) {
    if (shape.channels == 0 || shape.height == 0 || shape.width == 0) {
        throw Error(ErrorKind::shape, "grid dimensions must be positive");
    }
}

void require_same(const GridShape& a, const GridShape& b, const char* op) {
    if (!(a == b)) {
        throw Error(ErrorKind::shape, std::string(op) + ": shape mismatch");
    }
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class Xoshiro256 {
public:
    explicit Xoshiro256(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in (0, 1]: never zero, so log() below is finite.
    double next_open_unit() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4]{};
};

}  // namespace

LatentGrid::LatentGrid(GridShape shape, double fill) : shape_(shape), values_(shape.size(), fill) {
    require_shape(shape);
    if (!std::isfinite(fill)) throw Error(ErrorKind::shape, "fill value must be finite");
}

LatentGrid::LatentGrid(GridShape shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
    require_shape(shape);
    if (values_.size() != shape.size()) {
        throw Error(ErrorKind::shape, "value count " + std::to_string(values_.size()) + " does not match shape");
    }
    check_finite();
}

void LatentGrid::check_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) throw Error(ErrorKind::shape, "latent grid contains a non-finite value");
    }
}

PixelImage::PixelImage(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), values_(kChannels * height * width, fill) {
    if (height == 0 || width == 0) throw Error(ErrorKind::shape, "image dimensions must be positive");
    if (!(fill >= 0.0 && fill <= 1.0)) throw Error(ErrorKind::validation, "pixel values must lie in [0, 1]");
}

PixelImage::PixelImage(std::size_t height, std::size_t width, std::vector<double> planar_values)
    : height_(height), width_(width), values_(std::move(planar_values)) {
    if (height == 0 || width == 0) throw Error(ErrorKind::shape, "image dimensions must be positive");
    if (values_.size() != kChannels * height * width) {
        throw Error(ErrorKind::shape, "pixel value count does not match image dimensions");
    }
    for (double v : values_) {
        if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::validation, "pixel values must lie in [0, 1]");
    }
}

void PixelImage::set(std::size_t c, std::size_t y, std::size_t x, double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::validation, "pixel values must lie in [0, 1]");
    values_[(c * height_ + y) * width_ + x] = v;
}

LatentMask::LatentMask(std::size_t height, std::size_t width, bool fill)
    : height_(height), width_(width), bits_(height * width, fill ? 1 : 0) {
    if (height == 0 || width == 0) throw Error(ErrorKind::shape, "mask dimensions must be positive");
}

LatentMask::LatentMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
    if (height == 0 || width == 0) throw Error(ErrorKind::shape, "mask dimensions must be positive");
    if (bits_.size() != height * width) throw Error(ErrorKind::shape, "mask bit count does not match dimensions");
    for (auto b : bits_) {
        if (b > 1) throw Error(ErrorKind::validation, "mask values must be 0 or 1");
    }
}

std::size_t LatentMask::count() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
}

NoiseField sample_noise(std::uint64_t seed, GridShape shape) {
    require_shape(shape);
    Xoshiro256 rng(seed);
    std::vector<double> values(shape.size());
    for (double& v : values) {
        const double u1 = rng.next_open_unit();
        const double u2 = rng.next_open_unit();
        v = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    return NoiseField{LatentGrid(shape, std::move(values)), seed};
}

LatentGrid lerp(const LatentGrid& a, const LatentGrid& b, double w) {
    require_same(a.shape(), b.shape(), "lerp");
    if (!(w >= 0.0 && w <= 1.0)) throw Error(ErrorKind::validation, "lerp weight must lie in [0, 1]");
    LatentGrid out(a.shape());
    auto av = a.values();
    auto bv = b.values();
    auto ov = out.values();
    const double keep = 1.0 - w;
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = keep * av[i] + w * bv[i];
    return out;
}

LatentGrid masked_blend(const LatentGrid& base, const LatentGrid& overlay, const LatentMask& mask) {
    require_same(base.shape(), overlay.shape(), "masked_blend");
    if (mask.height() != base.height() || mask.width() != base.width()) {
        throw Error(ErrorKind::shape, "masked_blend: mask does not match grid");
    }
    LatentGrid out = base;
    for (std::size_t c = 0; c < base.channels(); ++c) {
        for (std::size_t y = 0; y < base.height(); ++y) {
            for (std::size_t x = 0; x < base.width(); ++x) {
                if (mask.at(y, x)) out.at(c, y, x) = overlay.at(c, y, x);
            }
        }
    }
    return out;
}

std::int64_t patch_token_count(std::int64_t height_px, std::int64_t width_px, std::int64_t vae_factor,
                               std::int64_t patch) {
    if (height_px <= 0 || width_px <= 0 || vae_factor <= 0 || patch <= 0) {
        throw Error(ErrorKind::validation, "patch_token_count arguments must be positive");
    }
    const std::int64_t cell = vae_factor * patch;
    return ((height_px + cell - 1) / cell) * ((width_px + cell - 1) / cell);
}

}  // namespace mirage
