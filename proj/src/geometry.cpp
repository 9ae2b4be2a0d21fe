#include "mirage/geometry.hpp"

#include <sstream>

#include "mirage/error.hpp"

namespace mirage {
namespace {

struct Span1D {
    int lo;
    int hi;
};

Span1D pad_axis(int lo, int hi, int multiple, int extent) {
    const int len = hi - lo;
    int target = ((len + multiple - 1) / multiple) * multiple;
    if (target > extent) target = (extent / multiple) * multiple;

    int new_lo;
    if (target >= len) {
        const int grow = target - len;
        new_lo = lo - grow / 2;
    } else {
        // Box larger than any aligned extent that fits: keep it centred.
        new_lo = lo + (len - target) / 2;
    }
    int new_hi = new_lo + target;
    if (new_lo < 0) {
        new_hi -= new_lo;
        new_lo = 0;
    }
    if (new_hi > extent) {
        new_lo -= new_hi - extent;
        new_hi = extent;
    }
    return {new_lo, new_hi};
}

void require_aligned(const BoundingBox& box, int f) {
    if (box.x0 % f || box.y0 % f || box.x1 % f || box.y1 % f) {
        throw Error(ErrorKind::shape, "box " + box.to_string() + " is not aligned to the latent grid");
    }
}

}  // namespace

std::string BoundingBox::to_string() const {
    std::ostringstream os;
    os << '[' << x0 << ", " << y0 << ", " << x1 << ", " << y1 << ']';
    return os.str();
}

void validate_box(const BoundingBox& box, int image_w, int image_h) {
    if (!box.valid_for(image_w, image_h)) {
        throw Error(ErrorKind::bounds, "box " + box.to_string() + " is empty or outside a " +
                                           std::to_string(image_w) + "x" + std::to_string(image_h) + " image");
    }
}

PixelImage crop(const PixelImage& image, const BoundingBox& box) {
    validate_box(box, static_cast<int>(image.width()), static_cast<int>(image.height()));
    const auto h = static_cast<std::size_t>(box.height());
    const auto w = static_cast<std::size_t>(box.width());
    std::vector<double> values(PixelImage::kChannels * h * w);
    for (std::size_t c = 0; c < PixelImage::kChannels; ++c) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                values[(c * h + y) * w + x] = image.at(c, y + box.y0, x + box.x0);
            }
        }
    }
    return PixelImage(h, w, std::move(values));
}

BoundingBox pad_to_multiple(const BoundingBox& box, int multiple, int image_w, int image_h) {
    if (multiple < 1) throw Error(ErrorKind::validation, "pad multiple must be at least 1");
    validate_box(box, image_w, image_h);
    if (image_w < multiple || image_h < multiple) {
        throw Error(ErrorKind::validation, "image smaller than pad multiple " + std::to_string(multiple));
    }
    const auto xs = pad_axis(box.x0, box.x1, multiple, image_w);
    const auto ys = pad_axis(box.y0, box.y1, multiple, image_h);
    return {xs.lo, ys.lo, xs.hi, ys.hi};
}

BoundingBox align_box_to_latent(const BoundingBox& box, int vae_factor, int patch, int image_w, int image_h) {
    if (vae_factor < 1 || patch < 1) throw Error(ErrorKind::validation, "vae_factor and patch must be positive");
    if (image_w % vae_factor || image_h % vae_factor) {
        throw Error(ErrorKind::shape, "image dimensions must be divisible by the codec factor");
    }
    validate_box(box, image_w, image_h);
    const int f = vae_factor;
    const BoundingBox cells{box.x0 / f, box.y0 / f, (box.x1 + f - 1) / f, (box.y1 + f - 1) / f};
    const BoundingBox padded = pad_to_multiple(cells, patch, image_w / f, image_h / f);
    return {padded.x0 * f, padded.y0 * f, padded.x1 * f, padded.y1 * f};
}

LatentMask box_to_latent_mask(const BoundingBox& box, int vae_factor, std::size_t latent_h, std::size_t latent_w) {
    if (vae_factor < 1) throw Error(ErrorKind::validation, "vae_factor must be positive");
    const int f = vae_factor;
    validate_box(box, static_cast<int>(latent_w) * f, static_cast<int>(latent_h) * f);
    LatentMask mask(latent_h, latent_w);
    for (std::size_t y = 0; y < latent_h; ++y) {
        const int py0 = static_cast<int>(y) * f;
        if (!(py0 < box.y1 && py0 + f > box.y0)) continue;
        for (std::size_t x = 0; x < latent_w; ++x) {
            const int px0 = static_cast<int>(x) * f;
            if (px0 < box.x1 && px0 + f > box.x0) mask.set(y, x, true);
        }
    }
    return mask;
}

LatentGrid crop_latent(const LatentGrid& grid, const BoundingBox& box, int vae_factor) {
    require_aligned(box, vae_factor);
    const int f = vae_factor;
    validate_box(box, static_cast<int>(grid.width()) * f, static_cast<int>(grid.height()) * f);
    const auto ox = static_cast<std::size_t>(box.x0 / f);
    const auto oy = static_cast<std::size_t>(box.y0 / f);
    const GridShape shape{grid.channels(), static_cast<std::size_t>(box.height() / f),
                          static_cast<std::size_t>(box.width() / f)};
    LatentGrid out(shape);
    for (std::size_t c = 0; c < shape.channels; ++c) {
        for (std::size_t y = 0; y < shape.height; ++y) {
            for (std::size_t x = 0; x < shape.width; ++x) out.at(c, y, x) = grid.at(c, y + oy, x + ox);
        }
    }
    return out;
}

void overwrite_region(LatentGrid& canvas, const LatentGrid& region, const BoundingBox& box, int vae_factor) {
    require_aligned(box, vae_factor);
    const int f = vae_factor;
    validate_box(box, static_cast<int>(canvas.width()) * f, static_cast<int>(canvas.height()) * f);
    if (region.channels() != canvas.channels() || region.height() != static_cast<std::size_t>(box.height() / f) ||
        region.width() != static_cast<std::size_t>(box.width() / f)) {
        throw Error(ErrorKind::shape, "region grid does not match the footprint of box " + box.to_string());
    }
    const auto ox = static_cast<std::size_t>(box.x0 / f);
    const auto oy = static_cast<std::size_t>(box.y0 / f);
    for (std::size_t c = 0; c < region.channels(); ++c) {
        for (std::size_t y = 0; y < region.height(); ++y) {
            for (std::size_t x = 0; x < region.width(); ++x) canvas.at(c, y + oy, x + ox) = region.at(c, y, x);
        }
    }
}

LatentGrid place(const LatentGrid& region, const BoundingBox& box, int vae_factor, GridShape canvas_shape) {
    LatentGrid canvas(canvas_shape, 0.0);
    overwrite_region(canvas, region, box, vae_factor);
    return canvas;
}

LatentMask mask_union(std::span<const LatentMask> masks, std::size_t height, std::size_t width) {
    LatentMask out(height, width);
    for (const auto& m : masks) {
        if (m.height() != height || m.width() != width) throw Error(ErrorKind::shape, "mask_union: shape mismatch");
        for (std::size_t y = 0; y < height; ++y) {
            for (std::size_t x = 0; x < width; ++x) {
                if (m.at(y, x)) out.set(y, x, true);
            }
        }
    }
    return out;
}

}  // namespace mirage
