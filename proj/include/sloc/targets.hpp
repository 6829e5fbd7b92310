#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sloc/rng.hpp"
#include "sloc/types.hpp"

namespace sloc {

/// Tilts with t above this are treated as this value; π_t is then
/// numerically a Dirac at the channel estimate.
inline constexpr double kMaxTiltTime = 1e12;

class GaussianMeasure {
public:
    /// Throws DomainError unless cov is symmetric (1e-12 relative) and positive definite.
    GaussianMeasure(Vector mean, Matrix cov);

    Eigen::Index dim() const noexcept { return mean_.size(); }
    const Vector& mean() const noexcept { return mean_; }
    const Matrix& cov() const noexcept { return cov_; }
    const Matrix& precision() const noexcept { return prec_; }
    /// Eigendecomposition cov = Q diag(λ) Qᵀ, ascending λ.
    const Vector& eigenvalues() const noexcept { return evals_; }
    const Matrix& eigenvectors() const noexcept { return evecs_; }
    /// Lower Cholesky factor of cov.
    const Matrix& chol() const noexcept { return chol_; }
    double log_det() const noexcept { return log_det_; }

    double log_density(const Vector& x) const;

private:
    Vector mean_;
    Matrix cov_;
    Matrix prec_;
    Vector evals_;
    Matrix evecs_;
    Matrix chol_;
    double log_det_ = 0.0;
};

struct MixtureComponent {
    double weight;
    GaussianMeasure gaussian;
};

class GaussianMixture {
public:
    /// Throws DomainError unless weights are in (0,1] and sum to 1 within 1e-12.
    explicit GaussianMixture(std::vector<MixtureComponent> components);

    Eigen::Index dim() const noexcept { return comps_.front().gaussian.dim(); }
    const std::vector<MixtureComponent>& components() const noexcept { return comps_; }
    const std::vector<double>& log_weights() const noexcept { return log_w_; }

    double log_density(const Vector& x) const;
    Vector mean() const;
    Matrix cov() const;

private:
    std::vector<MixtureComponent> comps_;
    std::vector<double> log_w_;
};

/// π ∝ exp(−V) with an α-strong-convexity certificate.
class GenericPotential {
public:
    using Fn = std::function<double(const Vector&)>;
    using GradFn = std::function<Vector(const Vector&)>;

    /// Runs the finite-difference gradient check on random probes and throws
    /// DomainError when it fails.
    GenericPotential(std::string name, Eigen::Index dim, Fn v, GradFn grad, double alpha,
                     std::optional<double> beta = std::nullopt);

    const std::string& name() const noexcept { return name_; }
    Eigen::Index dim() const noexcept { return dim_; }
    double value(const Vector& x) const { return v_(x); }
    Vector gradient(const Vector& x) const { return grad_(x); }
    double alpha() const noexcept { return alpha_; }
    const std::optional<double>& beta() const noexcept { return beta_; }

private:
    std::string name_;
    Eigen::Index dim_;
    Fn v_;
    GradFn grad_;
    double alpha_;
    std::optional<double> beta_;
};

enum class TargetKind { gaussian, mixture, generic };

/// Cheap-to-copy handle to an immutable base measure.
class TargetMeasure {
public:
    using Variant = std::variant<GaussianMeasure, GaussianMixture, GenericPotential>;

    TargetMeasure(GaussianMeasure g);
    TargetMeasure(GaussianMixture m);
    TargetMeasure(GenericPotential p);

    TargetKind kind() const noexcept;
    Eigen::Index dim() const noexcept;
    bool tractable() const noexcept { return kind() != TargetKind::generic; }

    const GaussianMeasure* gaussian() const noexcept { return std::get_if<GaussianMeasure>(v_.get()); }
    const GaussianMixture* mixture() const noexcept { return std::get_if<GaussianMixture>(v_.get()); }
    const GenericPotential* generic() const noexcept { return std::get_if<GenericPotential>(v_.get()); }

    /// Normalized log-density for Gaussian/mixture, −V(x) for generic.
    double log_density(const Vector& x) const;

private:
    std::shared_ptr<const Variant> v_;
};

/// Quadratic part of a tilt: scalar t (meaning t·I) or a symmetric PSD matrix.
class Regularizer {
public:
    Regularizer(double t);
    Regularizer(Matrix m);

    bool is_scalar() const noexcept { return scalar_.has_value(); }
    double scalar() const { return *scalar_; }
    Matrix matrix(Eigen::Index d) const;
    const Matrix& raw_matrix() const { return mat_; }
    double min_eigenvalue(Eigen::Index d) const;
    /// If the matrix is exactly s·I (bitwise) returns s.
    std::optional<double> as_identity_multiple() const;

private:
    std::optional<double> scalar_;
    Matrix mat_;
};

/// π ∝ exp(⟨c,x⟩ − ½ xᵀΣ_t x) π₀.
class TiltedMeasure {
public:
    TiltedMeasure(TargetMeasure base, Vector c, Regularizer reg)
        : base_(std::move(base)), c_(std::move(c)), reg_(std::move(reg)) {}

    const TargetMeasure& base() const noexcept { return base_; }
    const Vector& c() const noexcept { return c_; }
    const Regularizer& reg() const noexcept { return reg_; }
    Eigen::Index dim() const noexcept { return c_.size(); }

    double unnormalized_log_density(const Vector& x) const;

private:
    TargetMeasure base_;
    Vector c_;
    Regularizer reg_;
};

TiltedMeasure tilt(const TargetMeasure& base, const Vector& c, const Regularizer& reg);

struct Moments {
    Vector mean;
    Matrix cov;
    /// Norm of the Monte Carlo error of `mean`; 0 for closed forms.
    double std_error = 0.0;
    /// Effective sample size of the importance weights; +inf for closed forms.
    double ess = 0.0;
};

struct MomentOptions {
    /// IS estimates with ESS below this fraction of the budget are rejected.
    double min_ess_fraction = 0.01;
};

/// Closed-form moments; throws UnsupportedError for generic bases.
Moments posterior_moments(const TiltedMeasure& m);
/// Closed form when available, otherwise self-normalized importance sampling with `budget` draws.
Moments posterior_moments(const TiltedMeasure& m, std::size_t budget, Stream& rng,
                          const MomentOptions& opts = {});

/// Posterior mean of tilt(base, c, t·I) for tractable bases, without building a TiltedMeasure.
Vector tilted_mean(const TargetMeasure& base, const Vector& c, double t);

struct SamplerOptions {
    std::size_t max_tries = 10000;
};

/// n samples, one per row.
Matrix sample(const TiltedMeasure& m, std::size_t n, Stream& rng, const SamplerOptions& opts = {});
Vector sample_one(const TiltedMeasure& m, Stream& rng, const SamplerOptions& opts = {});
/// Exact draw from the untilted base.
Vector sample_base(const TargetMeasure& base, Stream& rng, const SamplerOptions& opts = {});

double log_partition(const TiltedMeasure& m);

/// Builtin potentials: "gaussian" (½‖x‖²), "quartic" (½‖x‖² + 0.1Σx⁴),
/// "logcosh" (½‖x‖² + Σ log cosh x).
GenericPotential builtin_potential(const std::string& name, Eigen::Index dim);
std::vector<std::string> builtin_potential_names();

}  // namespace sloc
