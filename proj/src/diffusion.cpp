#include "sloc/diffusion.hpp"

#include <cmath>

#include "sloc/error.hpp"

namespace sloc {

NoisyChannelSpec ou_marginal_params(double t) {
    if (!(t >= 0.0)) throw DomainError("ou_marginal_params: t must be >= 0");
    if (std::isinf(t)) return {0.0, 1.0};
    return {std::exp(-t), -std::expm1(-2.0 * t)};
}

NoisyChannelSpec ou_marginal_at_backward_time(double u) {
    if (!(u > 0.0)) throw DomainError("ou_marginal_at_backward_time: u must be > 0");
    return {std::sqrt(u / (u + 1.0)), 1.0 / (u + 1.0)};
}

namespace {

void check_spec(const NoisyChannelSpec& spec) {
    if (!(spec.sigma2 > 0.0)) throw DomainError("tweedie_score: sigma2 must be > 0");
}

}  // namespace

Vector tweedie_score(const TargetMeasure& base, const NoisyChannelSpec& spec, const Vector& y) {
    check_spec(spec);
    const Vector m = tilted_mean(base, spec.s * y / spec.sigma2, spec.s * spec.s / spec.sigma2);
    return (spec.s * m - y) / spec.sigma2;
}

Vector tweedie_score(const TargetMeasure& base, const NoisyChannelSpec& spec, const Vector& y, std::size_t budget,
                     Stream& rng) {
    if (base.tractable()) return tweedie_score(base, spec, y);
    check_spec(spec);
    const auto mo = posterior_moments(tilt(base, spec.s * y / spec.sigma2, spec.s * spec.s / spec.sigma2), budget, rng);
    return (spec.s * mo.mean - y) / spec.sigma2;
}

std::vector<BackwardState> backward_sde_run(const TargetMeasure& base, const TimeGrid& u_grid,
                                            const SamplePath& noise, const BackwardOptions& opts) {
    const Eigen::Index d = base.dim();
    if (!(noise.grid == u_grid)) throw DimensionError("backward_sde_run: noise path lives on a different grid");
    if (noise.dim() != d) throw DimensionError("backward_sde_run: noise dimension does not match the base");
    if (u_grid.front() < opts.eps_clip * (1.0 - 1e-12))
        throw DomainError("backward_sde_run: u grid must start at or above eps_clip");
    Stream init(noise.seed, noise.stream_id, Lane::initial);
    Stream inner(noise.seed, noise.stream_id, Lane::inner);
    std::vector<BackwardState> out;
    out.reserve(u_grid.size());
    Vector x = init.normal_vector(d);
    out.push_back({u_grid.front(), x});
    for (std::size_t k = 0; k < u_grid.steps(); ++k) {
        const double u = u_grid[k], du = u_grid[k + 1] - u_grid[k];
        const double uu = u * (u + 1.0);
        const Vector score = tweedie_score(base, ou_marginal_at_backward_time(u), x, opts.budget, inner);
        x = x + (x / (2.0 * uu) + score / uu) * du + noise.increment(k) / std::sqrt(uu);
        if (!x.allFinite()) throw NonFiniteError("backward_sde_run: non-finite state", k + 1);
        out.push_back({u_grid[k + 1], x});
    }
    return out;
}

TiltCoordinates rescale_to_tilt(const BackwardState& state) {
    if (!(state.u > 0.0)) throw DomainError("rescale_to_tilt: u must be > 0");
    return {state.u, std::sqrt(state.u * (state.u + 1.0)) * state.x};
}

}  // namespace sloc
