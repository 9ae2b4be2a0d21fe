#include "mirage/scene.hpp"

#include <algorithm>
#include <cmath>

#include "mirage/error.hpp"
#include "referring.hpp"
#include "strings.hpp"

namespace mirage {
namespace {

Rgb rgb255(int r, int g, int b) { return {r / 255.0, g / 255.0, b / 255.0}; }

const std::vector<Rgb>& square_palette() {
    static const std::vector<Rgb> p = {rgb255(200, 60, 60), rgb255(60, 160, 60), rgb255(60, 90, 200),
                                       rgb255(220, 180, 40), rgb255(150, 70, 170)};
    return p;
}

const std::vector<Rgb>& disk_palette() {
    static const std::vector<Rgb> p = {rgb255(240, 130, 40), rgb255(40, 170, 170)};
    return p;
}

void paint(PixelImage& img, const BoundingBox& box, const Rgb& color, SceneShape shape) {
    const double cx = (box.x0 + box.x1) / 2.0;
    const double cy = (box.y0 + box.y1) / 2.0;
    const double r = box.width() / 2.0;
    const double rgb[3] = {color.r, color.g, color.b};
    for (int y = box.y0; y < box.y1; ++y) {
        for (int x = box.x0; x < box.x1; ++x) {
            if (shape == SceneShape::disk) {
                const double dx = x + 0.5 - cx;
                const double dy = y + 0.5 - cy;
                if (dx * dx + dy * dy > r * r) continue;
            }
            for (std::size_t c = 0; c < 3; ++c) img.set(c, y, x, rgb[c]);
        }
    }
}

bool same_pixel(const PixelImage& img, std::size_t y, std::size_t x, const double ref[3]) {
    return img.at(0, y, x) == ref[0] && img.at(1, y, x) == ref[1] && img.at(2, y, x) == ref[2];
}

bool round_noun(std::string_view n) {
    return n == "ball" || n == "balls" || n == "disk" || n == "circle" || n == "sphere" || n == "dot" || n == "orb";
}

}  // namespace

std::vector<SceneObject> Scene::ordered(std::string_view category) const {
    std::vector<SceneObject> out;
    for (const auto& o : objects) {
        if (o.category == category) out.push_back(o);
    }
    std::sort(out.begin(), out.end(), [](const SceneObject& a, const SceneObject& b) { return a.box.x0 < b.box.x0; });
    return out;
}

Scene make_square_scene(const SceneSpec& spec) {
    if (spec.width < 16 || spec.height < 16) throw Error(ErrorKind::validation, "scene must be at least 16x16");
    if (spec.instance_count < 1 || spec.instance_count > 5) {
        throw Error(ErrorKind::validation, "scene supports 1 to 5 repeated instances");
    }
    if (spec.extra_count < 0 || spec.extra_count > 2) throw Error(ErrorKind::validation, "scene supports up to two extras");

    Scene scene;
    scene.background = rgb255(230, 230, 230);
    scene.image = PixelImage(spec.height, spec.width);
    for (std::size_t c = 0; c < 3; ++c) {
        const double v = c == 0 ? scene.background.r : c == 1 ? scene.background.g : scene.background.b;
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) scene.image.set(c, y, x, v);
        }
    }

    const int n = spec.instance_count;
    const double row_frac = spec.extra_count > 0 ? 0.3 : 0.4;
    const int size = std::max(2, std::min(static_cast<int>(std::floor(spec.width / static_cast<double>(n) * 0.6)),
                                          static_cast<int>(std::floor(spec.height * row_frac))));
    const double row_center = spec.extra_count > 0 ? spec.height * 0.35 : spec.height * 0.5;
    const int y0 = static_cast<int>(std::lround(row_center - size / 2.0));
    for (int i = 0; i < n; ++i) {
        const double cx = (i + 0.5) * spec.width / n;
        const int x0 = static_cast<int>(std::lround(cx - size / 2.0));
        SceneObject obj{spec.instance_category, SceneShape::square, {x0, y0, x0 + size, y0 + size},
                        square_palette()[static_cast<std::size_t>(i) % square_palette().size()]};
        paint(scene.image, obj.box, obj.color, obj.shape);
        scene.objects.push_back(obj);
    }

    if (spec.extra_count > 0) {
        const int d = std::max(4, (size * 4) / 5 / 2 * 2);
        const int ey0 = static_cast<int>(std::lround(spec.height * 0.78 - d / 2.0));
        for (int j = 0; j < spec.extra_count; ++j) {
            const double cx = (j + 0.5) * spec.width / spec.extra_count;
            const int x0 = static_cast<int>(std::lround(cx - d / 2.0));
            SceneObject obj{spec.extra_category, SceneShape::disk, {x0, ey0, x0 + d, ey0 + d},
                            disk_palette()[static_cast<std::size_t>(j)]};
            paint(scene.image, obj.box, obj.color, obj.shape);
            scene.objects.push_back(obj);
        }
    }
    return scene;
}

std::vector<Component> find_components(const PixelImage& image) {
    const std::size_t h = image.height();
    const std::size_t w = image.width();
    const double bg[3] = {image.at(0, 0, 0), image.at(1, 0, 0), image.at(2, 0, 0)};
    std::vector<std::uint8_t> seen(h * w, 0);
    std::vector<Component> comps;
    std::vector<std::pair<std::size_t, std::size_t>> stack;
    for (std::size_t sy = 0; sy < h; ++sy) {
        for (std::size_t sx = 0; sx < w; ++sx) {
            if (seen[sy * w + sx] || same_pixel(image, sy, sx, bg)) continue;
            BoundingBox box{static_cast<int>(sx), static_cast<int>(sy), static_cast<int>(sx) + 1, static_cast<int>(sy) + 1};
            std::size_t count = 0;
            stack.assign(1, {sy, sx});
            seen[sy * w + sx] = 1;
            while (!stack.empty()) {
                auto [y, x] = stack.back();
                stack.pop_back();
                ++count;
                box.x0 = std::min(box.x0, static_cast<int>(x));
                box.y0 = std::min(box.y0, static_cast<int>(y));
                box.x1 = std::max(box.x1, static_cast<int>(x) + 1);
                box.y1 = std::max(box.y1, static_cast<int>(y) + 1);
                const std::pair<std::ptrdiff_t, std::ptrdiff_t> nbrs[4] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
                for (auto [dy, dx] : nbrs) {
                    const auto ny = static_cast<std::ptrdiff_t>(y) + dy;
                    const auto nx = static_cast<std::ptrdiff_t>(x) + dx;
                    if (ny < 0 || nx < 0 || ny >= static_cast<std::ptrdiff_t>(h) || nx >= static_cast<std::ptrdiff_t>(w)) continue;
                    const auto idx = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
                    if (seen[idx] || same_pixel(image, ny, nx, bg)) continue;
                    seen[idx] = 1;
                    stack.emplace_back(ny, nx);
                }
            }
            comps.push_back({box, static_cast<double>(count) / static_cast<double>(box.area())});
        }
    }
    std::sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) {
        return a.box.x0 + a.box.x1 < b.box.x0 + b.box.x1;
    });
    return comps;
}

std::optional<BoundingBox> stub_localize(const PixelImage& image, std::string_view expression) {
    auto ws = text::words(text::lower(expression));
    if (!ws.empty() && ws.front() == "the") ws.erase(ws.begin());
    if (ws.empty()) return std::nullopt;
    const bool positional = ws.size() >= 2 && referring::is_position_word(ws[0]);
    const std::string& noun = positional ? ws[1] : ws[0];
    std::optional<std::string_view> from_side;
    if (positional && ws.size() >= 5 && ws[2] == "from" && ws[3] == "the") from_side = ws[4];

    std::vector<Component> candidates;
    for (const auto& c : find_components(image)) {
        const bool round = c.fill_ratio < 0.95;
        if (round != round_noun(noun)) continue;
        candidates.push_back(c);
    }
    if (!positional) {
        if (candidates.size() != 1) return std::nullopt;
        return candidates.front().box;
    }
    const auto idx = referring::resolve(referring::interpret(ws[0], from_side), candidates.size());
    if (!idx) return std::nullopt;
    return candidates[*idx].box;
}

PixelMask rasterize_box(const BoundingBox& box, std::size_t height, std::size_t width) {
    validate_box(box, static_cast<int>(width), static_cast<int>(height));
    PixelMask m(height, width);
    for (int y = box.y0; y < box.y1; ++y) {
        for (int x = box.x0; x < box.x1; ++x) m.set(y, x, true);
    }
    return m;
}

}  // namespace mirage
