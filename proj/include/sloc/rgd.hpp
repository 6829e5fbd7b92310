#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "sloc/rng.hpp"
#include "sloc/targets.hpp"

namespace sloc {

enum class InnerSampler { exact, rejection };

struct RgdConfig {
    double eta = 1.0;
    TargetMeasure target;
    InnerSampler inner = InnerSampler::exact;
    std::size_t max_tries = 10000;
    std::size_t steps = 1;
};

/// y ∼ N(x, ηI), then x′ ∼ tilt(π, y/η, 1/η).
Vector rgd_step(const Vector& x, const RgdConfig& cfg, Stream& rng);

/// With T = 1/η: c ∼ N(Tx, TI), then x′ ∼ tilt(π, c, T).
Vector rgd_step_channel(const Vector& x, const RgdConfig& cfg, Stream& rng);

/// cfg.steps transitions from x0; row k is the state after k steps.
Matrix rgd_chain(const Vector& x0, const RgdConfig& cfg, std::uint64_t seed, std::uint64_t stream_id);

struct ChainLaw {
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    /// KL(law_k ‖ target) for k = 0..steps.
    std::vector<double> kl;
    /// kl[k+1] / kl[k]; NaN when kl[k] = 0.
    std::vector<double> ratios;
};

ChainLaw chain_law_propagate(const GaussianMeasure& init, const GaussianMeasure& target, double eta, std::size_t steps);

/// α/(α + 1/η).
double lsi_lower_bound(double alpha, double eta);

struct StabilityReport {
    Matrix probes;  // one tilt y per row
    std::vector<double> lhs;
    std::vector<double> rhs;
    std::vector<bool> pass;
    double alpha_used;
    /// For Gaussian targets: RHS at the sharp α = ‖Σ‖_op.
    std::optional<double> sharp_alpha;
    std::vector<double> sharp_rhs;

    bool all_pass() const;
};

/// ½‖b(T_yπ) − b(π)‖² against α·KL(T_yπ‖π), T_yπ ∝ e^{⟨y,·⟩}π, all in closed form.
StabilityReport entropic_stability_probe(const TargetMeasure& target, const Matrix& probes, double alpha_claim);

struct ContractionEstimate {
    double ratio;
    double std_error;
    double kl0;
    double kl1;
    bool exact;
};

struct ContractionOptions {
    std::size_t max_tries = 10000;
    /// Reject when std_error/ratio exceeds this.
    double max_rel_std_error = 0.5;
    /// Points per axis of the 1-d quadrature grids.
    std::size_t grid_points = 2001;
};

/// KL(μ₁‖π)/KL(μ₀‖π) after one RGD step from μ₀ = init. Gaussian targets are exact via
/// chain_law_propagate; 1-d generic targets use KL₀ by quadrature and a plug-in Monte Carlo KL₁
/// whose log μ₁ comes from quadrature over the intermediate y.
ContractionEstimate heat_flow_contraction_mc(const TargetMeasure& target, const GaussianMeasure& init, double eta,
                                             std::size_t n_paths, std::uint64_t seed,
                                             const ContractionOptions& opts = {});

/// CSV rows (iteration, x_1..x_d[, kl]).
void write_chain_csv(std::ostream& os, const Matrix& chain, const std::vector<double>* kl = nullptr);

}  // namespace sloc
