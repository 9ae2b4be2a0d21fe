#include "mirage/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mirage/codec.hpp"
#include "mirage/prompts.hpp"

namespace mirage {
namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

constexpr std::string_view kPfConsSchema = R"([{"prompt_following": <0-10>, "consistency": <0-10>}])";
constexpr std::string_view kPqSchema = R"([{"perceptual_quality": <0-10>}])";

double score_field(const nlohmann::json& reply, const char* key) {
    const nlohmann::json* obj = &reply;
    if (reply.is_array()) {
        if (reply.empty()) throw SchemaViolation("expected a non-empty JSON array");
        obj = &reply[0];
    }
    if (!obj->is_object() || !obj->contains(key) || !(*obj)[key].is_number()) {
        throw SchemaViolation(std::string("field \"") + key + "\" must be a number");
    }
    const double v = (*obj)[key].get<double>();
    if (!(v >= 0.0 && v <= 10.0)) throw SchemaViolation(std::string("field \"") + key + "\" must lie in [0, 10]");
    return v;
}

std::string fmt(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

void ScoreTriple::validate() const {
    for (double v : {pf, cons, pq}) {
        if (!(v >= 0.0 && v <= 10.0)) throw Error(ErrorKind::validation, "scores must lie in [0, 10]");
    }
}

double overall_score(const ScoreTriple& s) {
    s.validate();
    return std::sqrt(std::min(s.pf, s.cons) * s.pq);
}

ScoreTriple avg_at_k(std::span<const ScoreTriple> samples, int k) {
    if (samples.empty()) throw Error(ErrorKind::validation, "avg@k needs at least one sample");
    if (k < 1 || samples.size() != static_cast<std::size_t>(k)) {
        throw Error(ErrorKind::validation,
                    "avg@k expects " + std::to_string(k) + " samples, got " + std::to_string(samples.size()));
    }
    ScoreTriple sum;
    for (const auto& s : samples) {
        s.validate();
        sum.pf += s.pf;
        sum.cons += s.cons;
        sum.pq += s.pq;
    }
    const double n = static_cast<double>(k);
    return {sum.pf / n, sum.cons / n, sum.pq / n};
}

MaskSet::MaskSet(std::size_t height, std::size_t width, std::vector<PixelMask> masks)
    : height_(height), width_(width), masks_(std::move(masks)), union_(height, width) {
    for (std::size_t i = 0; i < masks_.size(); ++i) {
        const auto& m = masks_[i];
        if (m.height != height || m.width != width) {
            throw Error(ErrorKind::shape, "mask " + std::to_string(i) + " is " + std::to_string(m.width) + "x" +
                                              std::to_string(m.height) + ", image is " + std::to_string(width) + "x" +
                                              std::to_string(height));
        }
        for (std::size_t j = 0; j < m.bits.size(); ++j) union_.bits[j] |= m.bits[j] ? 1 : 0;
    }
}

double psnr_from_mse(double mse) {
    if (mse < 1e-10) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

double luma(const PixelImage& image, std::size_t y, std::size_t x) {
    return 0.299 * image.at(0, y, x) + 0.587 * image.at(1, y, x) + 0.114 * image.at(2, y, x);
}

RegionMetricReport background_metrics(const PixelImage& reference, const PixelImage& edited, const MaskSet& masks,
                                      std::string mask_id) {
    const std::size_t h = reference.height();
    const std::size_t w = reference.width();
    if (edited.height() != h || edited.width() != w) {
        throw Error(ErrorKind::shape, "reference and edited images differ in size");
    }
    if (masks.height() != h || masks.width() != w) throw Error(ErrorKind::shape, "masks differ from the image size");
    const auto& un = masks.union_mask();
    const std::size_t bg = masks.background_count();
    if (bg == 0) throw Error(ErrorKind::validation, "mask union covers the whole image; no background left");

    RegionMetricReport r;
    r.mask_id = std::move(mask_id);
    r.pixel_count = bg;
    double sq = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                if (un.at(y, x)) continue;
                const double d = reference.at(c, y, x) - edited.at(c, y, x);
                sq += d * d;
            }
        }
    }
    r.mse = sq / static_cast<double>(bg * 3);
    r.psnr = psnr_from_mse(r.mse);

    const std::size_t win = kSsimWindow;
    if (h < win || w < win) return r;
    // Masked-pixel counts via an integral image decide window validity.
    std::vector<std::size_t> integral((h + 1) * (w + 1), 0);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            integral[(y + 1) * (w + 1) + x + 1] = (un.at(y, x) ? 1 : 0) + integral[y * (w + 1) + x + 1] +
                                                  integral[(y + 1) * (w + 1) + x] - integral[y * (w + 1) + x];
        }
    }
    std::vector<double> la(h * w);
    std::vector<double> lb(h * w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            la[y * w + x] = luma(reference, y, x);
            lb[y * w + x] = luma(edited, y, x);
        }
    }
    const double n = static_cast<double>(win * win);
    double total = 0.0;
    std::size_t windows = 0;
    for (std::size_t y0 = 0; y0 + win <= h; ++y0) {
        for (std::size_t x0 = 0; x0 + win <= w; ++x0) {
            const std::size_t masked = integral[(y0 + win) * (w + 1) + x0 + win] - integral[y0 * (w + 1) + x0 + win] -
                                       integral[(y0 + win) * (w + 1) + x0] + integral[y0 * (w + 1) + x0];
            if (masked != 0) continue;
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (std::size_t y = y0; y < y0 + win; ++y) {
                for (std::size_t x = x0; x < x0 + win; ++x) {
                    const double a = la[y * w + x];
                    const double b = lb[y * w + x];
                    sa += a;
                    sb += b;
                    saa += a * a;
                    sbb += b * b;
                    sab += a * b;
                }
            }
            const double ma = sa / n;
            const double mb = sb / n;
            const double va = saa / n - ma * ma;
            const double vb = sbb / n - mb * mb;
            const double cov = sab / n - ma * mb;
            total += ((2 * ma * mb + kC1) * (2 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
            ++windows;
        }
    }
    if (windows > 0) r.ssim = total / static_cast<double>(windows);
    return r;
}

PixelImage mask_out(const PixelImage& image, const PixelMask& mask) {
    PixelImage out = image;
    for (std::size_t y = 0; y < image.height(); ++y) {
        for (std::size_t x = 0; x < image.width(); ++x) {
            if (!mask.at(y, x)) continue;
            for (std::size_t c = 0; c < 3; ++c) out.set(c, y, x, 0.5);
        }
    }
    return out;
}

JudgeReport judge_scores(const PixelImage& original, const PixelImage& edited, const MaskSet& masks,
                         const std::string& instruction, ChatClient* judge, const ChatClientConfig& config, int k) {
    JudgeReport report;
    if (judge == nullptr) {
        report.unavailable_reason = "judge disabled";
        return report;
    }
    if (k < 1) throw Error(ErrorKind::validation, "judge repeat count must be >= 1");
    const auto masked_png = base64_encode(encode_png(mask_out(original, masks.union_mask())));
    const auto original_png = base64_encode(encode_png(original));
    const auto edited_png = base64_encode(encode_png(edited));
    try {
        std::vector<ScoreTriple> evals;
        for (int i = 0; i < k; ++i) {
            ChatRequest req;
            req.purpose = "judge_pf_cons";
            req.payload = {{"instruction", instruction}, {"evaluation", i}};
            req.messages.push_back({"user", render_prompt(prompt_template("judge_pf_cons"), {{"instruction", instruction}}),
                                    {masked_png, edited_png}});
            auto res = request_structured<std::pair<double, double>>(
                *judge, config, std::move(req), kPfConsSchema, [](const nlohmann::json& j) {
                    return std::pair{score_field(j, "prompt_following"), score_field(j, "consistency")};
                });
            report.retries += res.retries;
            evals.push_back({res.value.first, res.value.second, 0.0});
        }
        ChatRequest req;
        req.purpose = "judge_pq";
        req.messages.push_back({"user", render_prompt(prompt_template("judge_pq"), {}), {original_png, edited_png}});
        auto pq = request_structured<double>(*judge, config, std::move(req), kPqSchema,
                                             [](const nlohmann::json& j) { return score_field(j, "perceptual_quality"); });
        report.retries += pq.retries;
        for (auto& e : evals) e.pq = pq.value;
        report.evaluations = evals;
        report.scores = avg_at_k(evals, k);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::service) throw;
        report.unavailable_reason = e.what();
    }
    return report;
}

std::string background_csv(const std::vector<EvalRow>& rows) {
    std::string out = "Sample,Structure Distance,PSNR,LPIPS,MSE,SSIM,CLIP Whole,CLIP Edited\n";
    for (const auto& r : rows) {
        out += r.sample + ",," + fmt(r.background.psnr, 4) + ",," + fmt(r.background.mse, 10) + "," +
               (r.background.ssim ? fmt(*r.background.ssim, 6) : std::string()) + ",,\n";
    }
    return out;
}

std::string scores_csv(const std::vector<EvalRow>& rows) {
    std::string out = "Sample,PF,Cons,PQ,Overall\n";
    for (const auto& r : rows) {
        if (!r.scores) continue;
        const auto& s = *r.scores;
        out += r.sample + "," + fmt(s.pf, 3) + "," + fmt(s.cons, 3) + "," + fmt(s.pq, 3) + "," +
               fmt(overall_score(s), 3) + "\n";
    }
    return out;
}

}  // namespace mirage
