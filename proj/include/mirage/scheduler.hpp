#pragma once

#include <vector>

#include "mirage/tensor.hpp"

namespace mirage {

/// Uniform normalized time grid, times[i] = (T - i) / T, from 1 (noise) to 0 (clean).
struct TimeGrid {
    int steps = 0;
    std::vector<double> times;

    double step_size(int index) const { return times[index] - times[index + 1]; }
};

/// Switch ratio. A step taken at s belongs to the region stage iff s > rho;
/// the step at s == rho already belongs to the global stage.
struct SwitchPolicy {
    double rho = 0.6;

    static SwitchPolicy checked(double rho);
};

TimeGrid make_time_grid(int steps);

bool is_region_phase(double s, const SwitchPolicy& policy);

/// Number of steps (indices 0..T-1) taken in the region stage.
int region_step_count(const TimeGrid& grid, const SwitchPolicy& policy);

/// Rectified-flow forward interpolant (1 - s) * z0 + s * eps.
LatentGrid reference_latent(const LatentGrid& z0, const LatentGrid& eps, double s);

/// One explicit Euler step toward s = 0: z - ds * velocity.
LatentGrid euler_step(const LatentGrid& z, const LatentGrid& velocity, double ds);

}  // namespace mirage
