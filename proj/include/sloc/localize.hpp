#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <vector>

#include "sloc/sde.hpp"
#include "sloc/targets.hpp"

namespace sloc {

struct SLState {
    double t = 0.0;
    Vector c;
    Regularizer reg{0.0};
    /// Posterior mean of tilt(base, c, reg).
    Vector m;
    double m_std_error = 0.0;
};

struct SLOptions {
    /// IS draws per posterior-mean evaluation for generic bases.
    std::size_t budget = 2000;
    MomentOptions moments{};
};

/// Euler–Maruyama for dc = m_t dt + dW, c₀ = 0, with Σ_t = t·I.
std::vector<SLState> tilt_sde_run(const TargetMeasure& base, const TimeGrid& grid, const SamplePath& noise,
                                  const SLOptions& opts = {});

struct ChannelPath {
    Vector x;
    SamplePath c;  // c_t = t·x + B_t
};

/// Draws x ∼ base (lane target) and B (lane wiener) for (seed, stream_id).
ChannelPath channel_path(const TargetMeasure& base, const TimeGrid& grid, std::uint64_t seed,
                         std::uint64_t stream_id, const SamplerOptions& sopts = {});

struct ParticleCloud {
    double t = 0.0;
    Matrix points;  // n × d
    Vector log_weights;
    /// Accumulated log of the pre-renormalization mass.
    double log_mass = 0.0;

    Vector weights() const { return log_weights.array().exp(); }
    Vector mean() const { return points.transpose() * weights(); }
    double ess() const;
    double probability(const std::function<bool(const Vector&)>& in_set) const;
};

struct ParticleOptions {
    /// Weight collapse is reported when ESS falls below this fraction of the particle count.
    double min_ess_fraction = 0.01;
    /// Keep every k-th cloud (the final one is always kept).
    std::size_t record_every = 1;
    SamplerOptions sampler{};
};

/// Weighted-particle discretization of dπ_t(x) = ⟨x − m_t, dW_t⟩π_t(x). Particles are drawn
/// from lane initial of the noise path's stream.
std::vector<ParticleCloud> particle_sl_run(const TargetMeasure& base, std::size_t n_particles, const TimeGrid& grid,
                                           const SamplePath& noise, const ParticleOptions& opts = {});

/// One step of dc = CCᵀm dt + C dW, dΣ = CCᵀ dt. `state.reg` must hold a matrix.
SLState anisotropic_step(const TargetMeasure& base, const SLState& state, const Matrix& C, double dt,
                         const Vector& dw, Stream& rng, const SLOptions& opts = {});

/// Anisotropic run from c₀ = 0, Σ₀ = 0 with control C(t).
std::vector<SLState> anisotropic_sl_run(const TargetMeasure& base, const TimeGrid& grid, const SamplePath& noise,
                                        const std::function<Matrix(double)>& control, const SLOptions& opts = {});

/// CSV rows (stream_id, t, c_1..c_d, m_1..m_d).
void write_sl_csv(std::ostream& os, std::uint64_t stream_id, const std::vector<SLState>& states, bool header);

}  // namespace sloc
