#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mirage/backend.hpp"
#include "mirage/geometry.hpp"
#include "mirage/scheduler.hpp"

namespace mirage {

/// Which latent replacements run. `both` is the full method; the other two
/// switch one replacement off.
enum class Strategy { both, no_target, no_background };

std::string to_string(Strategy strategy);
Strategy parse_strategy(std::string_view name);

enum class Phase { region, global };

const char* to_string(Phase phase);

struct SessionConfig {
    int steps = 50;
    double rho = 0.6;
    Strategy strategy = Strategy::both;
    std::uint64_t seed = 0;
    bool trace = false;
    bool parallel_branches = true;
};

enum class BranchKind { global, region };

struct Branch {
    BranchKind kind = BranchKind::global;
    int region_index = -1;
    Condition condition;
    LatentGrid latent;
    std::optional<BoundingBox> box;
    bool active = false;
    std::int64_t tokens_per_step = 0;
    std::int64_t token_sum = 0;
};

/// One recorded fused latent: the state at grid point `index` (time `s`).
struct TraceEntry {
    int index = 0;
    double s = 1.0;
    Phase phase = Phase::region;
    LatentGrid latent;
    std::vector<std::int64_t> branch_tokens;
};

/// Wall-clock seconds per pipeline stage.
struct StageTimings {
    double parse_s = 0.0;
    double detect_s = 0.0;
    double inference_s = 0.0;
    double total() const { return parse_s + detect_s + inference_s; }
};

struct RunReport {
    int steps = 0;
    double rho = 0.0;
    Strategy strategy = Strategy::both;
    int region_steps = 0;
    int global_steps = 0;
    std::int64_t global_tokens_per_step = 0;
    std::vector<std::int64_t> region_tokens_per_step;
    std::int64_t region_phase_tokens = 0;
    std::int64_t baseline_region_phase_tokens = 0;
    std::int64_t global_phase_tokens = 0;
    std::int64_t total_tokens = 0;
    std::int64_t baseline_total_tokens = 0;
    /// [0] is the global branch, [k + 1] region k.
    std::vector<std::int64_t> branch_token_sums;
    StageTimings timings;
};

struct EditResult {
    PixelImage image;
    LatentGrid latent;
    RunReport report;
};

/// State of one multi-branch edit. Branch 0 is the global branch; branch
/// k + 1 runs region k. Exclusively owned by one driver.
class EditSession {
public:
    static EditSession init(PixelImage reference, std::string instruction, std::vector<RegionInstance> regions,
                            const SessionConfig& config, std::shared_ptr<const DenoiserBackend> backend);

    /// Advances every active region branch one Euler step and composes the
    /// fused latent at the next grid point. Throws a phase error outside the
    /// region stage.
    LatentGrid run_early_step(int step_index);

    /// Terminates the region branches and hands the last fused latent to the
    /// global branch.
    LatentGrid switch_to_global();

    /// One masked global step; background cells follow the reference trajectory.
    LatentGrid run_late_step(int step_index);

    /// Drives the remaining schedule, switching at the boundary.
    void run();

    EditResult finalize();

    int next_step() const { return next_step_; }
    bool switched() const { return switched_; }
    bool complete() const { return next_step_ == grid_.steps; }
    double current_s() const { return grid_.times[next_step_]; }
    int region_steps() const { return region_steps_; }

    const TimeGrid& time_grid() const { return grid_; }
    const SwitchPolicy& policy() const { return policy_; }
    const SessionConfig& config() const { return config_; }
    const std::vector<Branch>& branches() const { return branches_; }
    const std::vector<RegionInstance>& regions() const { return regions_; }
    const LatentGrid& noise() const { return noise_; }
    const LatentGrid& clean_reference() const { return reference_latent_; }
    const LatentMask& union_mask() const { return union_; }
    const LatentGrid& fused() const { return fused_; }
    const std::vector<TraceEntry>& trace() const { return trace_; }
    const DenoiserBackend& backend() const { return *backend_; }

    /// Reference trajectory at time s.
    LatentGrid reference_at(double s) const;

    StageTimings& timings() { return timings_; }

private:
    EditSession() = default;

    void advance_regions(int step_index);
    LatentGrid advance_global(int step_index) const;
    void overlay_regions(LatentGrid& canvas) const;
    void record(int index);
    void charge(Branch& branch);

    PixelImage reference_;
    std::string instruction_;
    std::vector<RegionInstance> regions_;
    SessionConfig config_;
    std::shared_ptr<const DenoiserBackend> backend_;
    BackendDescriptor descriptor_;
    TimeGrid grid_;
    SwitchPolicy policy_;
    int region_steps_ = 0;

    LatentGrid noise_;
    LatentGrid reference_latent_;
    LatentMask union_;
    std::vector<Branch> branches_;
    LatentGrid fused_;
    std::vector<TraceEntry> trace_;

    int next_step_ = 0;
    bool switched_ = false;
    bool finalized_ = false;
    std::int64_t region_phase_tokens_ = 0;
    std::int64_t global_phase_tokens_ = 0;
    StageTimings timings_;
};

}  // namespace mirage
