#pragma once

#include <span>
#include <string>
#include <vector>

#include "mirage/tensor.hpp"

namespace mirage {

/// Half-open pixel box [x0, x1) x [y0, y1), origin top-left.
struct BoundingBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    long long area() const { return static_cast<long long>(width()) * height(); }

    bool valid_for(int image_w, int image_h) const {
        return 0 <= x0 && x0 < x1 && x1 <= image_w && 0 <= y0 && y0 < y1 && y1 <= image_h;
    }
    bool contains(const BoundingBox& other) const {
        return x0 <= other.x0 && y0 <= other.y0 && other.x1 <= x1 && other.y1 <= y1;
    }

    std::string to_string() const;
    bool operator==(const BoundingBox&) const = default;
};

/// Throws a bounds error unless the box is non-empty and inside the image.
void validate_box(const BoundingBox& box, int image_w, int image_h);

/// One grounded sub-edit: referring expression, atomic instruction, the
/// padded box, its latent mask and the clean crop that conditions the branch.
struct RegionInstance {
    std::string referring_expression;
    std::string sub_instruction;
    BoundingBox box;
    LatentMask mask;
    PixelImage crop_image;
};

PixelImage crop(const PixelImage& image, const BoundingBox& box);

/// Smallest box with extents divisible by `multiple` that contains `box`,
/// grown symmetrically (odd surplus goes right/bottom), then shifted back
/// inside the image when growth crosses an edge.
BoundingBox pad_to_multiple(const BoundingBox& box, int multiple, int image_w, int image_h);

/// Snaps the box outward onto the vae_factor grid, then pads it in latent
/// cells to a multiple of `patch`. The result is what crop_latent and place
/// accept; for vae_factor 1 it equals pad_to_multiple(box, patch).
BoundingBox align_box_to_latent(const BoundingBox& box, int vae_factor, int patch, int image_w, int image_h);

/// A latent cell is set iff its f x f pixel footprint intersects the box.
LatentMask box_to_latent_mask(const BoundingBox& box, int vae_factor, std::size_t latent_h, std::size_t latent_w);

/// Latent sub-grid under an f-aligned box.
LatentGrid crop_latent(const LatentGrid& grid, const BoundingBox& box, int vae_factor);

/// Writes `region` into a zero canvas at the box's latent offset.
LatentGrid place(const LatentGrid& region, const BoundingBox& box, int vae_factor, GridShape canvas);

/// Copies `region` onto `canvas` at the box's latent offset in place.
void overwrite_region(LatentGrid& canvas, const LatentGrid& region, const BoundingBox& box, int vae_factor);

LatentMask mask_union(std::span<const LatentMask> masks, std::size_t height, std::size_t width);

}  // namespace mirage
