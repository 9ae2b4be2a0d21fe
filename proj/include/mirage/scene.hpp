#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mirage/geometry.hpp"
#include "mirage/image_io.hpp"
#include "mirage/toy_denoiser.hpp"

namespace mirage {

enum class SceneShape { square, disk };

struct SceneObject {
    std::string category;
    SceneShape shape = SceneShape::square;
    BoundingBox box;
    Rgb color;
};

/// Synthetic test scene with known ground truth. Every colour is a multiple
/// of 1/255, so PNG round trips are exact.
struct Scene {
    PixelImage image;
    Rgb background;
    std::vector<SceneObject> objects;

    /// Objects of one category, left to right.
    std::vector<SceneObject> ordered(std::string_view category) const;
};

struct SceneSpec {
    int width = 64;
    int height = 64;
    int instance_count = 3;
    std::string instance_category = "square";
    /// Extra disks in a lower row (benchmark scenes use two).
    int extra_count = 0;
    std::string extra_category = "ball";
};

/// Repeated squares in one evenly spaced row, optional disks below.
Scene make_square_scene(const SceneSpec& spec = {});

/// A connected blob of non-background pixels.
struct Component {
    BoundingBox box;
    double fill_ratio = 0.0;
};

/// 4-connected components of pixels that differ from the top-left pixel,
/// sorted left to right.
std::vector<Component> find_components(const PixelImage& image);

/// Resolves "the <position> <noun>[ from the left|right]" against the blobs
/// in a synthetic scene. Round blobs answer to "ball", "disk", "circle" and
/// similar nouns; every other noun names the square-like blobs. A bare
/// "the <noun>" resolves only when exactly one blob matches.
std::optional<BoundingBox> stub_localize(const PixelImage& image, std::string_view expression);

PixelMask rasterize_box(const BoundingBox& box, std::size_t height, std::size_t width);

}  // namespace mirage
