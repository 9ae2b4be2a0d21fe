#include "mirage/scheduler.hpp"

#include "mirage/error.hpp"

namespace mirage {

SwitchPolicy SwitchPolicy::checked(double rho) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw Error(ErrorKind::validation, "rho must lie in [0, 1]");
    return SwitchPolicy{rho};
}

TimeGrid make_time_grid(int steps) {
    if (steps <= 0) throw Error(ErrorKind::validation, "steps must be at least 1");
    TimeGrid grid{steps, std::vector<double>(static_cast<std::size_t>(steps) + 1)};
    // Integer ratio keeps grid points equal to their decimal literals (0.6, 0.8, ...).
    for (int i = 0; i <= steps; ++i) grid.times[i] = static_cast<double>(steps - i) / static_cast<double>(steps);
    return grid;
}

bool is_region_phase(double s, const SwitchPolicy& policy) { return s > policy.rho; }

int region_step_count(const TimeGrid& grid, const SwitchPolicy& policy) {
    int count = 0;
    for (int i = 0; i < grid.steps; ++i) {
        if (is_region_phase(grid.times[i], policy)) ++count;
    }
    return count;
}

LatentGrid reference_latent(const LatentGrid& z0, const LatentGrid& eps, double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorKind::validation, "time s must lie in [0, 1]");
    return lerp(z0, eps, s);
}

LatentGrid euler_step(const LatentGrid& z, const LatentGrid& velocity, double ds) {
    if (!(z.shape() == velocity.shape())) throw Error(ErrorKind::shape, "euler_step: shape mismatch");
    if (!(ds > 0.0)) throw Error(ErrorKind::validation, "euler_step: ds must be positive");
    LatentGrid out(z.shape());
    auto zv = z.values();
    auto vv = velocity.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = zv[i] - ds * vv[i];
    return out;
}

}  // namespace mirage
