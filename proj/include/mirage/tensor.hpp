#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mirage {

struct GridShape {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t size() const { return channels * height * width; }
    std::size_t plane() const { return height * width; }
    bool operator==(const GridShape&) const = default;
};

/// Dense channels x height x width grid of finite doubles, row-major per
/// channel plane. Carries every latent the engine touches.
class LatentGrid {
public:
    LatentGrid() = default;
    explicit LatentGrid(GridShape shape, double fill = 0.0);
    LatentGrid(GridShape shape, std::vector<double> values);

    const GridShape& shape() const { return shape_; }
    std::size_t channels() const { return shape_.channels; }
    std::size_t height() const { return shape_.height; }
    std::size_t width() const { return shape_.width; }

    double at(std::size_t c, std::size_t y, std::size_t x) const {
        return values_[(c * shape_.height + y) * shape_.width + x];
    }
    double& at(std::size_t c, std::size_t y, std::size_t x) {
        return values_[(c * shape_.height + y) * shape_.width + x];
    }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    /// Throws a shape error if any value is NaN or infinite.
    void check_finite() const;

    bool operator==(const LatentGrid&) const = default;

private:
    GridShape shape_{};
    std::vector<double> values_;
};

/// Three-channel planar image with values in [0, 1].
class PixelImage {
public:
    static constexpr std::size_t kChannels = 3;

    PixelImage() = default;
    PixelImage(std::size_t height, std::size_t width, double fill = 0.0);
    PixelImage(std::size_t height, std::size_t width, std::vector<double> planar_values);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    GridShape shape() const { return {kChannels, height_, width_}; }

    double at(std::size_t c, std::size_t y, std::size_t x) const {
        return values_[(c * height_ + y) * width_ + x];
    }
    void set(std::size_t c, std::size_t y, std::size_t x, double v);

    std::span<const double> values() const { return values_; }

    bool operator==(const PixelImage&) const = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> values_;
};

/// Binary mask over latent cells. No channel axis: a set cell switches all
/// channels of that cell together.
class LatentMask {
public:
    LatentMask() = default;
    LatentMask(std::size_t height, std::size_t width, bool fill = false);
    LatentMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    bool at(std::size_t y, std::size_t x) const { return bits_[y * width_ + x] != 0; }
    void set(std::size_t y, std::size_t x, bool v) { bits_[y * width_ + x] = v ? 1 : 0; }
    std::span<const std::uint8_t> bits() const { return bits_; }
    std::size_t count() const;

    bool operator==(const LatentMask&) const = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct NoiseField {
    LatentGrid grid;
    std::uint64_t seed = 0;
};

/// Standard-normal noise from xoshiro256** (seeded through splitmix64) and
/// Box-Muller. Bit-identical for equal (seed, shape).
NoiseField sample_noise(std::uint64_t seed, GridShape shape);

/// (1 - w) * a + w * b, elementwise.
LatentGrid lerp(const LatentGrid& a, const LatentGrid& b, double w);

/// base where mask is 0, overlay where mask is 1, all channels of a cell together.
LatentGrid masked_blend(const LatentGrid& base, const LatentGrid& overlay, const LatentMask& mask);

/// Transformer tokens for an image of the given pixel extent:
/// ceil(H / (f * p)) * ceil(W / (f * p)).
std::int64_t patch_token_count(std::int64_t height_px, std::int64_t width_px, std::int64_t vae_factor,
                               std::int64_t patch);

}  // namespace mirage
