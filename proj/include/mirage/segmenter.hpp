#pragma once

#include <vector>

#include "mirage/geometry.hpp"
#include "mirage/image_io.hpp"

namespace mirage {

/// Turns boxes into image-resolution masks, one per box.
class Segmenter {
public:
    virtual ~Segmenter() = default;
    virtual std::vector<PixelMask> segment(const PixelImage& image, const std::vector<BoundingBox>& boxes) = 0;
};

/// Fills each box.
class BoxFillSegmenter final : public Segmenter {
public:
    std::vector<PixelMask> segment(const PixelImage& image, const std::vector<BoundingBox>& boxes) override;
};

}  // namespace mirage
