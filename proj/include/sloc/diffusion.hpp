#pragma once

#include <vector>

#include "sloc/sde.hpp"
#include "sloc/targets.hpp"

namespace sloc {

/// y = s·x + N(0, σ²I), x ∼ π.
struct NoisyChannelSpec {
    double s = 1.0;
    double sigma2 = 1.0;
};

/// OU marginal x_t | x_0 ∼ N(e^{−t}x₀, (1−e^{−2t})I): returns (e^{−t}, 1−e^{−2t}).
NoisyChannelSpec ou_marginal_params(double t);

/// The OU marginal at t = τ⁻¹(u), computed from u directly: (√(u/(u+1)), 1/(u+1)).
NoisyChannelSpec ou_marginal_at_backward_time(double u);

/// ∇log ν(y) = (s·E[x|y] − y)/σ², with E[x|y] the mean of tilt(base, s·y/σ², s²/σ²).
Vector tweedie_score(const TargetMeasure& base, const NoisyChannelSpec& spec, const Vector& y);
Vector tweedie_score(const TargetMeasure& base, const NoisyChannelSpec& spec, const Vector& y, std::size_t budget,
                     Stream& rng);

struct BackwardState {
    double u;
    Vector x;
};

struct BackwardOptions {
    double eps_clip = kDefaultEpsClip;
    std::size_t budget = 2000;
};

/// Euler–Maruyama for the backward SDE
///   dx = [x/(2u(u+1)) + ∇log π←_u(x)/(u(u+1))] du + dW/√(u(u+1))
/// started from N(0,I) (lane initial) at the first grid point.
std::vector<BackwardState> backward_sde_run(const TargetMeasure& base, const TimeGrid& u_grid,
                                            const SamplePath& noise, const BackwardOptions& opts = {});

struct TiltCoordinates {
    double t;
    Vector c;
};

/// (u, x) ↦ (t = u, c = √(u(u+1))·x).
TiltCoordinates rescale_to_tilt(const BackwardState& state);

}  // namespace sloc
