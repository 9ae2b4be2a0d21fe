#include "mirage/fusion.hpp"

#include <chrono>
#include <future>

#include "mirage/error.hpp"

namespace mirage {
namespace {

class ScopedTimer {
public:
    explicit ScopedTimer(double& sink) : sink_(sink), start_(std::chrono::steady_clock::now()) {}
    ~ScopedTimer() {
        sink_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    double& sink_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace

std::string to_string(Strategy strategy) {
    switch (strategy) {
        case Strategy::both: return "both";
        case Strategy::no_target: return "no_target";
        case Strategy::no_background: return "no_background";
    }
    return "both";
}

Strategy parse_strategy(std::string_view name) {
    if (name == "both") return Strategy::both;
    if (name == "no_target") return Strategy::no_target;
    if (name == "no_background") return Strategy::no_background;
    throw Error(ErrorKind::validation, "unknown strategy '" + std::string(name) +
                                           "' (expected both, no_target or no_background)");
}

const char* to_string(Phase phase) { return phase == Phase::region ? "region" : "global"; }

EditSession EditSession::init(PixelImage reference, std::string instruction, std::vector<RegionInstance> regions,
                              const SessionConfig& config, std::shared_ptr<const DenoiserBackend> backend) {
    if (!backend) throw Error(ErrorKind::validation, "session needs a backend");
    if (instruction.empty()) throw Error(ErrorKind::validation, "instruction must be non-empty");

    EditSession session;
    session.descriptor_ = backend->descriptor();
    const int f = session.descriptor_.vae_factor;
    const int p = session.descriptor_.patch;
    const int img_w = static_cast<int>(reference.width());
    const int img_h = static_cast<int>(reference.height());
    if (img_w % f || img_h % f) throw Error(ErrorKind::shape, "reference dimensions must be divisible by the codec factor");

    session.grid_ = make_time_grid(config.steps);
    session.policy_ = SwitchPolicy::checked(config.rho);
    session.region_steps_ = region_step_count(session.grid_, session.policy_);
    session.config_ = config;
    session.backend_ = std::move(backend);

    session.reference_latent_ = session.backend_->encode(reference);
    const GridShape shape = session.reference_latent_.shape();
    if (shape.height * f != reference.height() || shape.width * f != reference.width()) {
        throw Error(ErrorKind::shape, "backend latent does not match its declared codec factor");
    }
    session.noise_ = sample_noise(config.seed, shape).grid;

    std::vector<LatentMask> masks;
    for (std::size_t k = 0; k < regions.size(); ++k) {
        const auto& r = regions[k];
        validate_box(r.box, img_w, img_h);
        const int multiple = f * p;
        if (r.box.x0 % f || r.box.y0 % f || r.box.width() % multiple || r.box.height() % multiple) {
            throw Error(ErrorKind::validation, "region " + std::to_string(k) + " box " + r.box.to_string() +
                                                   " is not padded to the backend multiple " +
                                                   std::to_string(multiple));
        }
        if (!(r.mask == box_to_latent_mask(r.box, f, shape.height, shape.width))) {
            throw Error(ErrorKind::validation, "region " + std::to_string(k) + " mask is not the rasterized box");
        }
        if (r.crop_image.width() != static_cast<std::size_t>(r.box.width()) ||
            r.crop_image.height() != static_cast<std::size_t>(r.box.height())) {
            throw Error(ErrorKind::validation, "region " + std::to_string(k) + " crop does not match its box");
        }
        if (r.sub_instruction.empty()) throw Error(ErrorKind::validation, "region sub-instruction must be non-empty");
        masks.push_back(r.mask);
    }
    session.union_ = mask_union(masks, shape.height, shape.width);

    const auto h_px = static_cast<std::int64_t>(reference.height());
    const auto w_px = static_cast<std::int64_t>(reference.width());
    Branch global;
    global.kind = BranchKind::global;
    global.condition = Condition{reference, instruction};
    global.latent = session.noise_;
    global.active = config.strategy != Strategy::both || session.region_steps_ == 0;
    global.tokens_per_step = patch_token_count(h_px, w_px, f, p);
    session.branches_.push_back(std::move(global));

    for (std::size_t k = 0; k < regions.size(); ++k) {
        const auto& r = regions[k];
        Branch b;
        b.kind = BranchKind::region;
        b.region_index = static_cast<int>(k);
        b.condition = Condition{r.crop_image, r.sub_instruction};
        b.latent = crop_latent(session.noise_, r.box, f);
        b.box = r.box;
        b.active = config.strategy != Strategy::no_target;
        b.tokens_per_step = patch_token_count(r.box.height(), r.box.width(), f, p);
        session.branches_.push_back(std::move(b));
    }

    session.reference_ = std::move(reference);
    session.instruction_ = std::move(instruction);
    session.regions_ = std::move(regions);

    // Fused state at s = 1.
    if (config.strategy == Strategy::no_background) {
        session.fused_ = session.noise_;
    } else {
        session.fused_ = session.reference_at(1.0);
    }
    if (config.strategy != Strategy::no_target) session.overlay_regions(session.fused_);
    session.record(0);
    return session;
}

LatentGrid EditSession::reference_at(double s) const { return reference_latent(reference_latent_, noise_, s); }

void EditSession::overlay_regions(LatentGrid& canvas) const {
    // Ascending k: a later region overwrites an earlier one where boxes overlap.
    for (std::size_t k = 1; k < branches_.size(); ++k) {
        overwrite_region(canvas, branches_[k].latent, *branches_[k].box, descriptor_.vae_factor);
    }
}

void EditSession::charge(Branch& branch) {
    branch.token_sum += branch.tokens_per_step;
    if (!switched_) {
        region_phase_tokens_ += branch.tokens_per_step;
    } else {
        global_phase_tokens_ += branch.tokens_per_step;
    }
}

void EditSession::advance_regions(int step_index) {
    const double s = grid_.times[step_index];
    const double ds = grid_.step_size(step_index);
    auto step_one = [&](Branch& b) {
        const LatentGrid v = backend_->predict_velocity(b.latent, s, b.condition);
        b.latent = euler_step(b.latent, v, ds);
        b.latent.check_finite();
    };

    if (config_.parallel_branches && branches_.size() > 2) {
        std::vector<std::future<void>> pending;
        for (std::size_t k = 1; k < branches_.size(); ++k) {
            if (branches_[k].active) pending.push_back(std::async(std::launch::async, step_one, std::ref(branches_[k])));
        }
        // Barrier: fusion reads every branch.
        for (auto& f : pending) f.wait();
        for (auto& f : pending) f.get();
    } else {
        for (std::size_t k = 1; k < branches_.size(); ++k) {
            if (branches_[k].active) step_one(branches_[k]);
        }
    }
    for (std::size_t k = 1; k < branches_.size(); ++k) {
        if (branches_[k].active) charge(branches_[k]);
    }
}

LatentGrid EditSession::advance_global(int step_index) const {
    const Branch& g = branches_.front();
    const double s = grid_.times[step_index];
    const LatentGrid v = backend_->predict_velocity(g.latent, s, g.condition);
    LatentGrid next = euler_step(g.latent, v, grid_.step_size(step_index));
    next.check_finite();
    return next;
}

void EditSession::record(int index) {
    if (!config_.trace) return;
    TraceEntry entry;
    entry.index = index;
    entry.s = grid_.times[index];
    entry.phase = is_region_phase(entry.s, policy_) ? Phase::region : Phase::global;
    entry.latent = fused_;
    for (const auto& b : branches_) entry.branch_tokens.push_back(b.token_sum);
    trace_.push_back(std::move(entry));
}

LatentGrid EditSession::run_early_step(int step_index) {
    if (complete()) throw Error(ErrorKind::state, "schedule already complete");
    if (switched_) throw Error(ErrorKind::phase, "region branches were terminated at the switch");
    if (step_index != next_step_) {
        throw Error(ErrorKind::state, "expected step " + std::to_string(next_step_) + ", got " + std::to_string(step_index));
    }
    if (!is_region_phase(grid_.times[step_index], policy_)) {
        throw Error(ErrorKind::phase, "step " + std::to_string(step_index) + " lies in the global stage");
    }
    ScopedTimer timer(timings_.inference_s);
    const double s_next = grid_.times[step_index + 1];
    Branch& global = branches_.front();

    switch (config_.strategy) {
        case Strategy::both: {
            advance_regions(step_index);
            LatentGrid fused = reference_at(s_next);
            overlay_regions(fused);
            fused_ = std::move(fused);
            break;
        }
        case Strategy::no_target: {
            LatentGrid predicted = advance_global(step_index);
            charge(global);
            fused_ = masked_blend(reference_at(s_next), predicted, union_);
            global.latent = fused_;
            break;
        }
        case Strategy::no_background: {
            advance_regions(step_index);
            LatentGrid fused = advance_global(step_index);
            charge(global);
            overlay_regions(fused);
            fused_ = std::move(fused);
            global.latent = fused_;
            break;
        }
    }
    ++next_step_;
    record(next_step_);
    return fused_;
}

LatentGrid EditSession::switch_to_global() {
    if (switched_) throw Error(ErrorKind::state, "session already switched to the global stage");
    if (next_step_ != region_steps_) {
        throw Error(ErrorKind::state, "switch requested before the region stage finished");
    }
    switched_ = true;
    for (std::size_t k = 1; k < branches_.size(); ++k) branches_[k].active = false;
    Branch& global = branches_.front();
    global.active = true;
    global.latent = fused_;
    return global.latent;
}

LatentGrid EditSession::run_late_step(int step_index) {
    if (complete()) throw Error(ErrorKind::state, "schedule already complete");
    if (step_index != next_step_) {
        throw Error(ErrorKind::state, "expected step " + std::to_string(next_step_) + ", got " + std::to_string(step_index));
    }
    if (is_region_phase(grid_.times[step_index], policy_)) {
        throw Error(ErrorKind::phase, "step " + std::to_string(step_index) + " lies in the region stage");
    }
    if (!switched_) throw Error(ErrorKind::state, "switch_to_global must run before the global stage");

    ScopedTimer timer(timings_.inference_s);
    const double s_next = grid_.times[step_index + 1];
    Branch& global = branches_.front();
    LatentGrid predicted = advance_global(step_index);
    charge(global);
    if (config_.strategy == Strategy::no_background) {
        fused_ = std::move(predicted);
    } else {
        fused_ = masked_blend(reference_at(s_next), predicted, union_);
    }
    global.latent = fused_;
    ++next_step_;
    record(next_step_);
    return fused_;
}

void EditSession::run() {
    while (!complete()) {
        if (next_step_ < region_steps_) {
            run_early_step(next_step_);
        } else {
            if (!switched_) switch_to_global();
            run_late_step(next_step_);
        }
    }
    if (!switched_) switch_to_global();
}

EditResult EditSession::finalize() {
    if (!complete() || !switched_) throw Error(ErrorKind::state, "finalize called before the schedule completed");
    if (finalized_) throw Error(ErrorKind::state, "session already finalized");
    finalized_ = true;

    // Empty global stage: the background-pinning merge still applies once at s = 0.
    if (grid_.steps == region_steps_ && config_.strategy != Strategy::no_background) {
        fused_ = masked_blend(reference_at(0.0), fused_, union_);
    }

    EditResult result;
    {
        ScopedTimer timer(timings_.inference_s);
        result.image = backend_->decode(fused_);
    }
    result.latent = fused_;

    RunReport& r = result.report;
    r.steps = grid_.steps;
    r.rho = policy_.rho;
    r.strategy = config_.strategy;
    r.region_steps = region_steps_;
    r.global_steps = grid_.steps - region_steps_;
    r.global_tokens_per_step = branches_.front().tokens_per_step;
    for (std::size_t k = 1; k < branches_.size(); ++k) r.region_tokens_per_step.push_back(branches_[k].tokens_per_step);
    r.region_phase_tokens = region_phase_tokens_;
    r.baseline_region_phase_tokens = static_cast<std::int64_t>(region_steps_) * r.global_tokens_per_step;
    r.global_phase_tokens = global_phase_tokens_;
    r.total_tokens = region_phase_tokens_ + global_phase_tokens_;
    r.baseline_total_tokens = static_cast<std::int64_t>(grid_.steps) * r.global_tokens_per_step;
    for (const auto& b : branches_) r.branch_token_sums.push_back(b.token_sum);
    r.timings = timings_;
    return result;
}

}  // namespace mirage
