#include "mirage/toy_denoiser.hpp"

#include <algorithm>
#include <charconv>
#include <regex>

#include "mirage/error.hpp"
#include "strings.hpp"

namespace mirage {
namespace {

Error grammar_error(std::size_t clause, const std::string& text, const std::string& why) {
    return Error(ErrorKind::grammar, "toy clause " + std::to_string(clause) + " (\"" + text + "\"): " + why);
}

double parse_unit(const std::string& token, std::size_t clause, const std::string& text) {
    double v = 0.0;
    const auto t = text::trim(token);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || !(v >= 0.0 && v <= 1.0)) {
        throw grammar_error(clause, text, "color components must be numbers in [0, 1]");
    }
    return v;
}

ToyEditOp parse_clause(const std::string& raw, std::size_t index) {
    const std::string clause = text::squeeze(raw);
    if (clause.empty()) throw grammar_error(index, raw, "empty clause");
    const auto ws = text::words(clause);
    const std::string verb = text::lower(ws.front());

    ToyEditOp op;
    if (verb == "noop") {
        if (ws.size() != 1) throw grammar_error(index, clause, "noop takes no arguments");
        return op;
    }
    if (verb == "set_color") {
        static const std::regex re(R"(^set_color\s*(.*?)\s*\bto\s*\(([^)]*)\)\s*$)", std::regex::icase);
        std::smatch m;
        if (!std::regex_match(clause, m, re)) throw grammar_error(index, clause, "expected 'set_color ... to (r,g,b)'");
        const auto comps = text::split(m[2].str(), ',');
        if (comps.size() != 3) throw grammar_error(index, clause, "color needs three components");
        op.op = ToyOpKind::set_color;
        op.subject = m[1].str();
        op.color = {parse_unit(comps[0], index, clause), parse_unit(comps[1], index, clause),
                     parse_unit(comps[2], index, clause)};
        return op;
    }
    if (verb == "remove") {
        op.op = ToyOpKind::remove;
        op.subject = text::trim(clause.substr(ws.front().size()));
        return op;
    }
    if (verb == "replace") {
        static const std::regex re(R"(^replace\s*(.*?)\s*\b(?:with|to)\s+([a-z_]+)\s*$)", std::regex::icase);
        std::smatch m;
        if (!std::regex_match(clause, m, re)) throw grammar_error(index, clause, "expected 'replace ... with <pattern>'");
        const auto pattern = text::lower(m[2].str());
        if (pattern != "checker" && pattern != "hstripes" && pattern != "vstripes") {
            throw grammar_error(index, clause, "unknown pattern '" + pattern + "'");
        }
        op.op = ToyOpKind::replace_pattern;
        op.subject = m[1].str();
        op.pattern = pattern;
        return op;
    }
    throw grammar_error(index, clause, "unknown operation '" + ws.front() + "'");
}

Rgb border_mean(const PixelImage& img) {
    const std::size_t h = img.height();
    const std::size_t w = img.width();
    // Offsets from the corner pixel keep a uniform border exact.
    const double base[3] = {img.at(0, 0, 0), img.at(1, 0, 0), img.at(2, 0, 0)};
    double sum[3] = {0, 0, 0};
    std::size_t n = 0;
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            if (y != 0 && y + 1 != h && x != 0 && x + 1 != w) continue;
            for (std::size_t c = 0; c < 3; ++c) sum[c] += img.at(c, y, x) - base[c];
            ++n;
        }
    }
    const double k = static_cast<double>(n);
    return {base[0] + sum[0] / k, base[1] + sum[1] / k, base[2] + sum[2] / k};
}

}  // namespace

std::vector<ToyEditOp> parse_toy_instruction(std::string_view instruction) {
    if (text::trim(instruction).empty()) throw Error(ErrorKind::grammar, "empty toy instruction");
    std::vector<ToyEditOp> ops;
    const auto clauses = text::split(instruction, ';');
    for (std::size_t i = 0; i < clauses.size(); ++i) ops.push_back(parse_clause(clauses[i], i));
    return ops;
}

bool is_noop_instruction(std::string_view instruction) {
    try {
        const auto ops = parse_toy_instruction(instruction);
        return std::all_of(ops.begin(), ops.end(), [](const ToyEditOp& op) { return op.op == ToyOpKind::noop; });
    } catch (const Error&) {
        return false;
    }
}

PixelImage apply_toy_op(const ToyEditOp& op, const PixelImage& base) {
    PixelImage out = base;
    const std::size_t h = base.height();
    const std::size_t w = base.width();
    switch (op.op) {
        case ToyOpKind::noop:
            break;
        case ToyOpKind::set_color:
        case ToyOpKind::remove: {
            const Rgb fill = op.op == ToyOpKind::set_color ? op.color : border_mean(base);
            const double rgb[3] = {fill.r, fill.g, fill.b};
            for (std::size_t c = 0; c < 3; ++c) {
                for (std::size_t y = 0; y < h; ++y) {
                    for (std::size_t x = 0; x < w; ++x) out.set(c, y, x, rgb[c]);
                }
            }
            break;
        }
        case ToyOpKind::replace_pattern:
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    std::size_t phase = 0;
                    if (op.pattern == "checker") phase = (x + y) % 2;
                    else if (op.pattern == "hstripes") phase = y % 2;
                    else phase = x % 2;
                    for (std::size_t c = 0; c < 3; ++c) out.set(c, y, x, static_cast<double>(phase));
                }
            }
            break;
    }
    return out;
}

PixelImage resolve_target(const Condition& condition, const PixelImage& base) {
    std::vector<ToyEditOp> ops;
    try {
        ops = parse_toy_instruction(condition.instruction);
    } catch (const Error& e) {
        throw Error(ErrorKind::resolver, "cannot resolve instruction: " + std::string(e.what()));
    }
    return apply_toy_op(ops.front(), base);
}

LatentGrid encode_pixels(const PixelImage& image, int vae_factor) {
    if (vae_factor == 1) return LatentGrid(image.shape(), std::vector<double>(image.values().begin(), image.values().end()));
    if (vae_factor != 2) throw Error(ErrorKind::validation, "toy codec supports factors 1 and 2 only");
    if (image.height() % 2 || image.width() % 2) {
        throw Error(ErrorKind::shape, "pooling codec needs even image dimensions");
    }
    const GridShape shape{3, image.height() / 2, image.width() / 2};
    LatentGrid out(shape);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < shape.height; ++y) {
            for (std::size_t x = 0; x < shape.width; ++x) {
                const double sum = image.at(c, 2 * y, 2 * x) + image.at(c, 2 * y, 2 * x + 1) +
                                   image.at(c, 2 * y + 1, 2 * x) + image.at(c, 2 * y + 1, 2 * x + 1);
                out.at(c, y, x) = sum / 4.0;
            }
        }
    }
    return out;
}

PixelImage decode_latent(const LatentGrid& latent, int vae_factor) {
    if (vae_factor != 1 && vae_factor != 2) throw Error(ErrorKind::validation, "toy codec supports factors 1 and 2 only");
    if (latent.channels() != 3) throw Error(ErrorKind::shape, "toy codec decodes three-channel latents");
    const auto f = static_cast<std::size_t>(vae_factor);
    const std::size_t h = latent.height() * f;
    const std::size_t w = latent.width() * f;
    std::vector<double> values(3 * h * w);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                values[(c * h + y) * w + x] = std::clamp(latent.at(c, y / f, x / f), 0.0, 1.0);
            }
        }
    }
    return PixelImage(h, w, std::move(values));
}

OracleBackend::OracleBackend(OracleOptions options) : options_(std::move(options)) {
    if (options_.vae_factor != 1 && options_.vae_factor != 2) {
        throw Error(ErrorKind::validation, "oracle codec factor must be 1 or 2");
    }
    if (options_.patch < 1) throw Error(ErrorKind::validation, "patch must be positive");
    if (!(options_.semantic_horizon >= 0.0 && options_.semantic_horizon < 1.0)) {
        throw Error(ErrorKind::validation, "semantic horizon must lie in [0, 1)");
    }
    if (options_.anchor) anchor_noise_ = sample_noise(options_.anchor->seed, options_.anchor->shape).grid;
}

LatentGrid OracleBackend::conditional_velocity(const LatentGrid& latent, double s, const Condition& condition) const {
    if (!(s > 0.0 && s <= 1.0)) throw Error(ErrorKind::validation, "oracle velocity needs s in (0, 1]");
    const LatentGrid target = encode(resolve_target(condition, condition.image));
    if (!(target.shape() == latent.shape())) {
        throw Error(ErrorKind::shape, "condition image does not match the latent canvas");
    }
    const double sigma = std::max(s, kSigmaMin);
    LatentGrid v(latent.shape());
    auto zv = latent.values();
    auto tv = target.values();
    auto out = v.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (zv[i] - tv[i]) / sigma;
    return v;
}

LatentGrid OracleBackend::predict_velocity(const LatentGrid& latent, double s, const Condition& condition) const {
    if (anchor_noise_ && latent.shape() == anchor_noise_->shape() && s <= options_.semantic_horizon) {
        if (!(s > 0.0)) throw Error(ErrorKind::validation, "oracle velocity needs s in (0, 1]");
        LatentGrid v(latent.shape());
        auto zv = latent.values();
        auto ev = anchor_noise_->values();
        auto out = v.values();
        const double denom = 1.0 - s;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (ev[i] - zv[i]) / denom;
        return v;
    }
    return conditional_velocity(latent, s, condition);
}

LatentGrid OracleBackend::encode(const PixelImage& image) const { return encode_pixels(image, options_.vae_factor); }

PixelImage OracleBackend::decode(const LatentGrid& latent) const { return decode_latent(latent, options_.vae_factor); }

BackendDescriptor OracleBackend::descriptor() const {
    return BackendDescriptor{options_.anchor ? "oracle-anchored" : "oracle", options_.vae_factor, options_.patch, true,
                             "uniform", "float64"};
}

}  // namespace mirage
