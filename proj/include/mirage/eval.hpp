#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mirage/chat.hpp"
#include "mirage/image_io.hpp"
#include "mirage/tensor.hpp"

namespace mirage {

/// Judge scores, each in [0, 10].
struct ScoreTriple {
    double pf = 0.0;
    double cons = 0.0;
    double pq = 0.0;

    void validate() const;
};

/// sqrt(min(pf, cons) * pq)
double overall_score(const ScoreTriple& s);

/// Componentwise mean of exactly k samples.
ScoreTriple avg_at_k(std::span<const ScoreTriple> samples, int k);

/// Ground-truth target masks sharing the image size, with their union.
class MaskSet {
public:
    MaskSet(std::size_t height, std::size_t width, std::vector<PixelMask> masks = {});

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    const std::vector<PixelMask>& masks() const { return masks_; }
    const PixelMask& union_mask() const { return union_; }
    std::size_t background_count() const { return height_ * width_ - union_.count(); }

private:
    std::size_t height_;
    std::size_t width_;
    std::vector<PixelMask> masks_;
    PixelMask union_;
};

struct RegionMetricReport {
    double psnr = 0.0;
    double mse = 0.0;
    std::optional<double> ssim;
    std::size_t pixel_count = 0;
    std::string mask_id;
};

inline constexpr double kPsnrCapDb = 100.0;
inline constexpr int kSsimWindow = 8;

/// 10 log10(1 / mse), capped at 100 dB below mse 1e-10.
double psnr_from_mse(double mse);

double luma(const PixelImage& image, std::size_t y, std::size_t x);

/// MSE, PSNR and SSIM over the pixels outside the mask union. SSIM uses luma,
/// an 8x8 uniform window at stride 1 and only windows lying entirely in the
/// background; with no such window it is absent.
RegionMetricReport background_metrics(const PixelImage& reference, const PixelImage& edited, const MaskSet& masks,
                                       std::string mask_id = "background");

/// Copy of `image` with every masked pixel set to mid gray.
PixelImage mask_out(const PixelImage& image, const PixelMask& mask);

struct JudgeReport {
    std::optional<ScoreTriple> scores;
    std::vector<ScoreTriple> evaluations;
    int retries = 0;
    std::string unavailable_reason;
};

/// PF and Cons are asked k times with (masked original, edited) and averaged;
/// PQ is asked once with (original, edited). A missing judge or a service
/// failure leaves `scores` empty.
JudgeReport judge_scores(const PixelImage& original, const PixelImage& edited, const MaskSet& masks,
                         const std::string& instruction, ChatClient* judge, const ChatClientConfig& config, int k = 3);

struct EvalRow {
    std::string sample;
    RegionMetricReport background;
    std::optional<ScoreTriple> scores;
};

/// Columns: Sample, Structure Distance, PSNR, LPIPS, MSE, SSIM, CLIP Whole,
/// CLIP Edited. Feature-based columns are left empty.
std::string background_csv(const std::vector<EvalRow>& rows);
/// Columns: Sample, PF, Cons, PQ, Overall. Rows without scores are skipped.
std::string scores_csv(const std::vector<EvalRow>& rows);

}  // namespace mirage
