#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mirage/backend.hpp"

namespace mirage {

enum class ToyOpKind { noop, set_color, remove, replace_pattern };

struct Rgb {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
    bool operator==(const Rgb&) const = default;
};

/// One clause of the toy instruction grammar:
///   noop
///   set_color [subject] to (r,g,b)
///   remove [subject]
///   replace [subject] with <checker|hstripes|vstripes>
/// The subject words are kept for diagnostics only; the op always covers the
/// whole canvas it is applied to.
struct ToyEditOp {
    ToyOpKind op = ToyOpKind::noop;
    Rgb color{};
    std::string pattern;
    std::string subject;
};

/// Splits on ';' and parses every clause. Throws a grammar error naming the
/// offending clause index.
std::vector<ToyEditOp> parse_toy_instruction(std::string_view instruction);

/// True if every clause is `noop`.
bool is_noop_instruction(std::string_view instruction);

PixelImage apply_toy_op(const ToyEditOp& op, const PixelImage& base);

/// Applies the FIRST clause of the condition's instruction to `base`. A
/// single-branch model sees a composite instruction but realizes only one
/// clause; per-region fidelity has to come from the engine.
PixelImage resolve_target(const Condition& condition, const PixelImage& base);

// Codecs. Factor 1 is the identity; factor 2 is 2x2 mean pooling with
// nearest-neighbour decode. Decode clamps to [0, 1].
LatentGrid encode_pixels(const PixelImage& image, int vae_factor);
PixelImage decode_latent(const LatentGrid& latent, int vae_factor);

struct NoiseAnchor {
    std::uint64_t seed = 0;
    GridShape shape{};
};

struct OracleOptions {
    int vae_factor = 1;
    int patch = 1;
    /// When set, full-canvas latents at s <= semantic_horizon get the exact
    /// rectified-flow velocity (eps - z) / (1 - s) for the anchored noise,
    /// i.e. the oracle refines whatever clean image the state already encodes.
    std::optional<NoiseAnchor> anchor;
    double semantic_horizon = 0.6;
};

inline constexpr double kSigmaMin = 1e-6;

/// Analytic backend whose conditional velocity (z - encode(target)) / s
/// drives any state along the straight line to its target.
class OracleBackend final : public DenoiserBackend {
public:
    explicit OracleBackend(OracleOptions options = {});

    LatentGrid predict_velocity(const LatentGrid& latent, double s, const Condition& condition) const override;
    LatentGrid encode(const PixelImage& image) const override;
    PixelImage decode(const LatentGrid& latent) const override;
    BackendDescriptor descriptor() const override;

    /// Conditional velocity only, ignoring any anchor.
    LatentGrid conditional_velocity(const LatentGrid& latent, double s, const Condition& condition) const;

    const OracleOptions& options() const { return options_; }

private:
    OracleOptions options_;
    std::optional<LatentGrid> anchor_noise_;
};

}  // namespace mirage
