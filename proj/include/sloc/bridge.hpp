#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "sloc/polchinski.hpp"
#include "sloc/sde.hpp"
#include "sloc/targets.hpp"

namespace sloc {

struct DiscreteMeasure {
    /// Throws unless weights are positive and sum to 1 within 1e-12.
    DiscreteMeasure(Matrix points, Vector weights);

    Matrix points;  // n × d
    Vector weights;

    Eigen::Index size() const { return weights.size(); }
};

struct DiscreteCoupling {
    Matrix gamma;
    Vector row_target;
    Vector col_target;

    /// Max of the L1 row and column marginal violations.
    double marginal_residual() const;
};

struct SinkhornResult {
    DiscreteCoupling coupling;
    Vector f;
    Vector g;
    Vector log_f;
    Vector log_g;
    std::size_t iterations = 0;
    double residual = 0.0;
    bool converged = false;
    /// Marginal residual after every iteration.
    std::vector<double> trace;
};

/// Log of R₀₁(x_i, y_j) = μ_i k(x_i,y_j)/Σ_j k(x_i,y_j), k the heat kernel exp(−½‖x−y‖²).
Matrix log_reference_kernel(const DiscreteMeasure& mu, const DiscreteMeasure& pi);
Matrix reference_kernel(const DiscreteMeasure& mu, const DiscreteMeasure& pi);

/// Log-domain scaling for min KL(γ‖R) over Γ(μ,π); γ = R ⊙ f gᵀ.
SinkhornResult sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& pi, const Matrix& ref_kernel, double tol,
                        std::size_t max_iter);
SinkhornResult sinkhorn_log(const Vector& mu, const Vector& pi, const Matrix& log_kernel, double tol,
                            std::size_t max_iter);

struct ObjectivePair {
    double ssb;
    double eot;
    /// γ charges an entry where the reference vanishes.
    bool infinite = false;
};

/// ssb = KL(γ‖R₀₁), eot = Σ ½‖x−y‖²γ + KL(γ‖μ⊗π).
ObjectivePair objective_pair(const DiscreteCoupling& gamma, const DiscreteMeasure& mu, const DiscreteMeasure& pi,
                             const Matrix& ref_kernel);

/// Max defect of the discrete Schrödinger system
///   f_i E_R[g | x_i] = μ_i / R₀(i),   g_j E_R[f | y_j] = π_j / R₁(j).
double schrodinger_residual(const SinkhornResult& result, const DiscreteMeasure& mu, const DiscreteMeasure& pi,
                            const Matrix& ref_kernel);

/// Reference on three times R(i,k,j) = μ_i K1(i,k) K2(k,j). Solves the endpoint bridge and returns
/// max |P*(j | i, k) − g_j K2(k,j)/g_τ(k)| with g_τ = K2 g.
double three_time_markov_defect(const Vector& mu, const Matrix& k1, const Matrix& k2, const Vector& pi, double tol,
                                std::size_t max_iter);

/// u_τ(v) = −∇V_τ(v) = (m_τ(v) − v)/(1−τ).
class FollmerDrift {
public:
    explicit FollmerDrift(TargetMeasure base, std::size_t budget = 2000) : base_(std::move(base)), budget_(budget) {}

    const TargetMeasure& base() const noexcept { return base_; }
    Vector operator()(double tau, const Vector& v, Stream& rng) const;

private:
    TargetMeasure base_;
    std::size_t budget_;
};

/// Terminal states v_{1−ε} of the Föllmer SDE from v₀ = 0 (one per noise path).
Vector follmer_sample(const TargetMeasure& base, const TimeGrid& tau_grid, const SamplePath& noise,
                      const PolchinskiOptions& opts = {});

struct EnergyEstimate {
    double energy;
    double std_error;
};

/// ½∫E‖u_τ(v_τ)‖²dτ along paths of dv = u dτ + dW, left Riemann sums per path.
EnergyEstimate girsanov_energy(const FollmerDrift& drift, const TimeGrid& tau_grid, std::size_t n_paths,
                               std::uint64_t seed, unsigned workers = 1);

/// Dense CSV of γ.
void write_coupling_csv(std::ostream& os, const DiscreteCoupling& c);

}  // namespace sloc
