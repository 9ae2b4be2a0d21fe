#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <memory>
#include <string>

#include "mirage/fusion.hpp"
#include "mirage/geometry.hpp"
#include "mirage/scene.hpp"
#include "mirage/toy_denoiser.hpp"

namespace testing {

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline mirage::RegionInstance make_region(const mirage::PixelImage& ref, const mirage::BoundingBox& box,
                                          const std::string& edit, int f = 1) {
    mirage::RegionInstance r;
    r.referring_expression = "region";
    r.sub_instruction = edit;
    r.box = box;
    r.mask = mirage::box_to_latent_mask(box, f, ref.height() / f, ref.width() / f);
    r.crop_image = mirage::crop(ref, box);
    return r;
}

inline std::shared_ptr<const mirage::DenoiserBackend> anchored_oracle(std::uint64_t seed, const mirage::PixelImage& ref,
                                                                      int f = 1, int p = 1) {
    mirage::OracleOptions o;
    o.vae_factor = f;
    o.patch = p;
    o.anchor = mirage::NoiseAnchor{seed, {3, ref.height() / f, ref.width() / f}};
    return std::make_shared<mirage::OracleBackend>(o);
}

// Pixel lies inside any region box.
inline bool in_any(const std::vector<mirage::BoundingBox>& boxes, std::size_t y, std::size_t x) {
    for (const auto& b : boxes) {
        if (static_cast<int>(x) >= b.x0 && static_cast<int>(x) < b.x1 && static_cast<int>(y) >= b.y0 &&
            static_cast<int>(y) < b.y1)
            return true;
    }
    return false;
}

// Zero-velocity backend with a configurable codec factor and patch; only
// the token accounting is meaningful.
class PoolingStub final : public mirage::DenoiserBackend {
public:
    PoolingStub(int f, int p) : f_(f), p_(p) {}
    mirage::LatentGrid predict_velocity(const mirage::LatentGrid& latent, double, const mirage::Condition&) const override {
        return mirage::LatentGrid(latent.shape(), 0.0);
    }
    mirage::LatentGrid encode(const mirage::PixelImage& image) const override {
        const auto f = static_cast<std::size_t>(f_);
        mirage::LatentGrid out({4, image.height() / f, image.width() / f}, 0.0);
        for (std::size_t y = 0; y < out.height(); ++y)
            for (std::size_t x = 0; x < out.width(); ++x) out.at(0, y, x) = image.at(0, y * f, x * f);
        return out;
    }
    mirage::PixelImage decode(const mirage::LatentGrid& latent) const override {
        return mirage::PixelImage(latent.height() * f_, latent.width() * f_, 0.0);
    }
    mirage::BackendDescriptor descriptor() const override { return {"pooling-stub", f_, p_, true, "uniform", "float64"}; }

private:
    int f_;
    int p_;
};

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                ("mirage-" + tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testing
