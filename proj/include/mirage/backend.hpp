#pragma once

#include <string>

#include "mirage/tensor.hpp"

namespace mirage {

struct BackendDescriptor {
    std::string name;
    int vae_factor = 1;
    int patch = 1;
    bool supports_variable_size = true;
    std::string schedule = "uniform";
    std::string dtype = "float64";
};

/// What a branch is conditioned on: the clean image (full reference or crop)
/// and the instruction text (global or atomic).
struct Condition {
    PixelImage image;
    std::string instruction;
};

/// One-step velocity predictor plus its codec. Implementations must accept
/// concurrent calls.
class DenoiserBackend {
public:
    virtual ~DenoiserBackend() = default;

    virtual LatentGrid predict_velocity(const LatentGrid& latent, double s, const Condition& condition) const = 0;
    virtual LatentGrid encode(const PixelImage& image) const = 0;
    virtual PixelImage decode(const LatentGrid& latent) const = 0;
    virtual BackendDescriptor descriptor() const = 0;
};

}  // namespace mirage
