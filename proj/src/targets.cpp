#include "sloc/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <type_traits>

#include "sloc/error.hpp"

namespace sloc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
    if (got != want)
        throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(want) +
                             ", got " + std::to_string(got));
}

double log_sum_exp(const std::vector<double>& v) {
    const double mx = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

bool symmetric_enough(const Matrix& m) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

// Posterior of a Gaussian prior under a tilt, in the form used by every
// tractable operation below.
struct GaussPost {
    Vector mean;
    Matrix cov;
    double log_z;
};

// Scalar reg goes through the cached eigenbasis of the prior covariance.
GaussPost gauss_post_scalar(const GaussianMeasure& g, const Vector& c, double t, bool want_cov) {
    const Vector& lam = g.eigenvalues();
    const Matrix& q = g.eigenvectors();
    const Vector h0 = g.precision() * g.mean();
    const Vector a = q.transpose() * (h0 + c);
    const Vector s = lam.array() / (1.0 + t * lam.array());
    GaussPost p;
    p.mean = q * (s.array() * a.array()).matrix();
    if (want_cov) p.cov = q * s.asDiagonal() * q.transpose();
    p.log_z = 0.5 * (a.array().square() * s.array()).sum() - 0.5 * g.mean().dot(h0) -
              0.5 * (1.0 + t * lam.array()).log().sum();
    return p;
}

GaussPost gauss_post_matrix(const GaussianMeasure& g, const Vector& c, const Matrix& reg) {
    const Vector h0 = g.precision() * g.mean();
    const Vector h = h0 + c;
    const Matrix p = g.precision() + reg;
    Eigen::LLT<Matrix> llt(p);
    if (llt.info() != Eigen::Success) throw DomainError("tilted precision is not positive definite");
    GaussPost out;
    out.mean = llt.solve(h);
    out.cov = llt.solve(Matrix::Identity(g.dim(), g.dim()));
    const double log_det_p = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    out.log_z = 0.5 * h.dot(out.mean) - 0.5 * g.mean().dot(h0) - 0.5 * (g.log_det() + log_det_p);
    return out;
}

GaussPost gauss_post(const GaussianMeasure& g, const Vector& c, const Regularizer& reg, bool want_cov) {
    if (reg.is_scalar()) return gauss_post_scalar(g, c, reg.scalar(), want_cov);
    if (auto s = reg.as_identity_multiple()) return gauss_post_scalar(g, c, *s, want_cov);
    return gauss_post_matrix(g, c, reg.raw_matrix());
}

struct MixPost {
    std::vector<GaussPost> comps;
    std::vector<double> probs;
    double log_z;
};

MixPost mix_post(const GaussianMixture& mix, const Vector& c, const Regularizer& reg, bool want_cov) {
    MixPost mp;
    std::vector<double> lw;
    for (std::size_t k = 0; k < mix.components().size(); ++k) {
        mp.comps.push_back(gauss_post(mix.components()[k].gaussian, c, reg, want_cov));
        lw.push_back(mix.log_weights()[k] + mp.comps.back().log_z);
    }
    mp.log_z = log_sum_exp(lw);
    for (double v : lw) mp.probs.push_back(std::exp(v - mp.log_z));
    return mp;
}

// Proposal for the generic rejection / importance sampler: U is the tilted
// potential, L(x) = U(x̂) + ⟨g, x − x̂⟩ + κ/2‖x − x̂‖² lies below U.
struct Envelope {
    Vector xhat;
    Vector grad;
    double u_hat;
    double kappa;
    Vector center;
};

double tilted_potential(const GenericPotential& p, const Vector& c, const Regularizer& reg,
                        const Vector& x) {
    double quad = reg.is_scalar() ? reg.scalar() * x.squaredNorm() : x.dot(reg.raw_matrix() * x);
    return p.value(x) - c.dot(x) + 0.5 * quad;
}

Vector tilted_gradient(const GenericPotential& p, const Vector& c, const Regularizer& reg,
                       const Vector& x) {
    Vector g = p.gradient(x) - c;
    if (reg.is_scalar())
        g += reg.scalar() * x;
    else
        g += reg.raw_matrix() * x;
    return g;
}

Envelope make_envelope(const TiltedMeasure& m, const GenericPotential& p) {
    const Eigen::Index d = m.dim();
    Envelope e;
    e.kappa = p.alpha() + m.reg().min_eigenvalue(d);
    if (!(e.kappa > 0.0))
        throw DomainError("generic tilt needs alpha + lambda_min(reg) > 0 for a proposal");
    double reg_max = m.reg().is_scalar()
                         ? m.reg().scalar()
                         : Eigen::SelfAdjointEigenSolver<Matrix>(m.reg().raw_matrix(), Eigen::EigenvaluesOnly)
                               .eigenvalues()
                               .maxCoeff();
    const double smooth = p.beta() ? *p.beta() + reg_max : e.kappa;
    const double base_step = 1.0 / std::max(smooth, e.kappa);

    Vector x = Vector::Zero(d);
    double u = tilted_potential(p, m.c(), m.reg(), x);
    for (int it = 0; it < 200; ++it) {
        const Vector g = tilted_gradient(p, m.c(), m.reg(), x);
        const double gn2 = g.squaredNorm();
        if (gn2 == 0.0) break;
        double step = base_step;
        Vector xn = x - step * g;
        double un = tilted_potential(p, m.c(), m.reg(), xn);
        for (int bt = 0; bt < 60 && !(un <= u - 0.5 * step * gn2); ++bt) {
            step *= 0.5;
            xn = x - step * g;
            un = tilted_potential(p, m.c(), m.reg(), xn);
        }
        if (!(un <= u)) break;
        x = std::move(xn);
        u = un;
    }
    e.xhat = x;
    e.u_hat = u;
    e.grad = tilted_gradient(p, m.c(), m.reg(), x);
    e.center = x - e.grad / e.kappa;
    return e;
}

// log of exp(L(x) − U(x)) for a proposal draw x.
double envelope_log_ratio(const Envelope& e, const GenericPotential& p, const TiltedMeasure& m,
                          const Vector& x) {
    const Vector dx = x - e.xhat;
    const double lower = e.u_hat + e.grad.dot(dx) + 0.5 * e.kappa * dx.squaredNorm();
    return std::min(0.0, lower - tilted_potential(p, m.c(), m.reg(), x));
}

Vector envelope_draw(const Envelope& e, Stream& rng) {
    return e.center + rng.normal_vector(e.center.size()) / std::sqrt(e.kappa);
}

Vector rejection_draw(const Envelope& e, const GenericPotential& p, const TiltedMeasure& m, Stream& rng,
                      std::size_t max_tries) {
    double acc_sum = 0.0;
    for (std::size_t k = 0; k < max_tries; ++k) {
        Vector x = envelope_draw(e, rng);
        const double lr = envelope_log_ratio(e, p, m, x);
        acc_sum += std::exp(lr);
        if (std::log(rng.uniform_open()) < lr) return x;
    }
    throw SamplerError("rejection sampler exhausted " + std::to_string(max_tries) + " tries",
                       acc_sum / static_cast<double>(max_tries));
}

std::size_t pick(const std::vector<double>& probs, double u) {
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
        acc += probs[k];
        if (u < acc) return k;
    }
    return probs.size() - 1;
}

}  // namespace

GaussianMeasure::GaussianMeasure(Vector mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
    if (mean_.size() < 1) throw DimensionError("gaussian: dimension must be at least 1");
    require_dim(cov_.rows(), mean_.size(), "gaussian covariance rows");
    require_dim(cov_.cols(), mean_.size(), "gaussian covariance cols");
    if (!mean_.allFinite() || !cov_.allFinite()) throw DomainError("gaussian: non-finite parameters");
    if (!symmetric_enough(cov_)) throw DomainError("gaussian: covariance is not symmetric");
    cov_ = 0.5 * (cov_ + cov_.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov_);
    evals_ = es.eigenvalues();
    evecs_ = es.eigenvectors();
    if (!(evals_.minCoeff() > 0.0)) throw DomainError("gaussian: covariance is not positive definite");
    Eigen::LLT<Matrix> llt(cov_);
    if (llt.info() != Eigen::Success) throw DomainError("gaussian: covariance is not positive definite");
    chol_ = llt.matrixL();
    prec_ = llt.solve(Matrix::Identity(dim(), dim()));
    log_det_ = evals_.array().log().sum();
}

double GaussianMeasure::log_density(const Vector& x) const {
    require_dim(x.size(), dim(), "gaussian log_density");
    const Vector r = x - mean_;
    return -0.5 * (static_cast<double>(dim()) * kLog2Pi + log_det_ + r.dot(prec_ * r));
}

GaussianMixture::GaussianMixture(std::vector<MixtureComponent> components) : comps_(std::move(components)) {
    if (comps_.empty()) throw DomainError("mixture: needs at least one component");
    double total = 0.0;
    for (const auto& c : comps_) {
        if (!(c.weight > 0.0 && c.weight <= 1.0)) throw DomainError("mixture: weight outside (0,1]");
        require_dim(c.gaussian.dim(), comps_.front().gaussian.dim(), "mixture component");
        total += c.weight;
        log_w_.push_back(std::log(c.weight));
    }
    if (std::abs(total - 1.0) > 1e-12) throw DomainError("mixture: weights do not sum to 1");
}

double GaussianMixture::log_density(const Vector& x) const {
    std::vector<double> v;
    for (std::size_t k = 0; k < comps_.size(); ++k) v.push_back(log_w_[k] + comps_[k].gaussian.log_density(x));
    return log_sum_exp(v);
}

Vector GaussianMixture::mean() const {
    Vector m = Vector::Zero(dim());
    for (const auto& c : comps_) m += c.weight * c.gaussian.mean();
    return m;
}

Matrix GaussianMixture::cov() const {
    const Vector m = mean();
    Matrix s = Matrix::Zero(dim(), dim());
    for (const auto& c : comps_) {
        const Vector r = c.gaussian.mean() - m;
        s += c.weight * (c.gaussian.cov() + r * r.transpose());
    }
    return s;
}

GenericPotential::GenericPotential(std::string name, Eigen::Index dim, Fn v, GradFn grad, double alpha,
                                   std::optional<double> beta)
    : name_(std::move(name)), dim_(dim), v_(std::move(v)), grad_(std::move(grad)), alpha_(alpha), beta_(beta) {
    if (dim_ < 1) throw DimensionError("potential: dimension must be at least 1");
    if (!(alpha_ >= 0.0) || !std::isfinite(alpha_)) throw DomainError("potential: alpha must be finite and >= 0");
    if (beta_ && !(*beta_ >= alpha_)) throw DomainError("potential: beta must be >= alpha");
    Stream probe(0x5eedf00dULL, 0, Lane::aux);
    const double h = 1e-6;
    for (int k = 0; k < 8; ++k) {
        const Vector x = probe.normal_vector(dim_) * (1.0 + k % 3);
        const Vector g = grad_(x);
        require_dim(g.size(), dim_, "potential gradient");
        Vector fd(dim_);
        for (Eigen::Index i = 0; i < dim_; ++i) {
            Vector xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            fd[i] = (v_(xp) - v_(xm)) / (2.0 * h);
        }
        if ((g - fd).norm() > 1e-5 * (1.0 + g.norm()))
            throw DomainError("potential '" + name_ + "': gradient fails finite-difference check");
    }
}

TargetMeasure::TargetMeasure(GaussianMeasure g) : v_(std::make_shared<const Variant>(std::move(g))) {}
TargetMeasure::TargetMeasure(GaussianMixture m) : v_(std::make_shared<const Variant>(std::move(m))) {}
TargetMeasure::TargetMeasure(GenericPotential p) : v_(std::make_shared<const Variant>(std::move(p))) {}

TargetKind TargetMeasure::kind() const noexcept {
    switch (v_->index()) {
        case 0: return TargetKind::gaussian;
        case 1: return TargetKind::mixture;
        default: return TargetKind::generic;
    }
}

Eigen::Index TargetMeasure::dim() const noexcept {
    return std::visit([](const auto& m) { return m.dim(); }, *v_);
}

double TargetMeasure::log_density(const Vector& x) const {
    return std::visit(
        [&](const auto& m) -> double {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, GenericPotential>)
                return -m.value(x);
            else
                return m.log_density(x);
        },
        *v_);
}

Regularizer::Regularizer(double t) : scalar_(t) {}
Regularizer::Regularizer(Matrix m) : mat_(std::move(m)) {}

Matrix Regularizer::matrix(Eigen::Index d) const {
    if (scalar_) return *scalar_ * Matrix::Identity(d, d);
    return mat_;
}

double Regularizer::min_eigenvalue(Eigen::Index d) const {
    if (scalar_) return *scalar_;
    (void)d;
    return Eigen::SelfAdjointEigenSolver<Matrix>(mat_, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

std::optional<double> Regularizer::as_identity_multiple() const {
    if (scalar_) return scalar_;
    const double s = mat_(0, 0);
    for (Eigen::Index i = 0; i < mat_.rows(); ++i)
        for (Eigen::Index j = 0; j < mat_.cols(); ++j)
            if (mat_(i, j) != (i == j ? s : 0.0)) return std::nullopt;
    return s;
}

double TiltedMeasure::unnormalized_log_density(const Vector& x) const {
    require_dim(x.size(), dim(), "tilted log_density");
    const double quad = reg_.is_scalar() ? reg_.scalar() * x.squaredNorm() : x.dot(reg_.raw_matrix() * x);
    return base_.log_density(x) + c_.dot(x) - 0.5 * quad;
}

TiltedMeasure tilt(const TargetMeasure& base, const Vector& c, const Regularizer& reg) {
    const Eigen::Index d = base.dim();
    require_dim(c.size(), d, "tilt vector");
    if (!c.allFinite()) throw DomainError("tilt: non-finite tilt vector");
    if (reg.is_scalar()) {
        const double t = reg.scalar();
        if (!(t >= 0.0) || std::isnan(t)) throw DomainError("tilt: scalar reg must be >= 0");
        return TiltedMeasure(base, c, Regularizer(std::min(t, kMaxTiltTime)));
    }
    const Matrix& m = reg.raw_matrix();
    require_dim(m.rows(), d, "tilt reg rows");
    require_dim(m.cols(), d, "tilt reg cols");
    if (!m.allFinite() || !symmetric_enough(m)) throw DomainError("tilt: reg matrix is not symmetric");
    const Matrix sym = 0.5 * (m + m.transpose());
    const double scale = std::max(1.0, sym.cwiseAbs().maxCoeff());
    if (Eigen::SelfAdjointEigenSolver<Matrix>(sym, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() < -1e-12 * scale)
        throw DomainError("tilt: reg matrix is not positive semidefinite");
    return TiltedMeasure(base, c, Regularizer(sym));
}

Moments posterior_moments(const TiltedMeasure& m) {
    const auto& base = m.base();
    const double inf = std::numeric_limits<double>::infinity();
    if (const auto* g = base.gaussian()) {
        GaussPost p = gauss_post(*g, m.c(), m.reg(), true);
        return {std::move(p.mean), std::move(p.cov), 0.0, inf};
    }
    if (const auto* mix = base.mixture()) {
        const MixPost mp = mix_post(*mix, m.c(), m.reg(), true);
        const Eigen::Index d = m.dim();
        Vector mean = Vector::Zero(d);
        Matrix second = Matrix::Zero(d, d);
        for (std::size_t k = 0; k < mp.comps.size(); ++k) {
            const auto& c = mp.comps[k];
            mean += mp.probs[k] * c.mean;
            second += mp.probs[k] * (c.cov + c.mean * c.mean.transpose());
        }
        Matrix cov = second - mean * mean.transpose();
        return {std::move(mean), std::move(cov), 0.0, inf};
    }
    throw UnsupportedError("posterior_moments: generic base needs a sampling budget and stream");
}

Moments posterior_moments(const TiltedMeasure& m, std::size_t budget, Stream& rng, const MomentOptions& opts) {
    const auto* p = m.base().generic();
    if (!p) return posterior_moments(m);
    if (!m.reg().is_scalar())
        if (auto s = m.reg().as_identity_multiple())
            return posterior_moments(TiltedMeasure(m.base(), m.c(), Regularizer(*s)), budget, rng, opts);
    if (budget == 0) throw DomainError("posterior_moments: budget must be positive for a generic base");
    const Envelope e = make_envelope(m, *p);
    const Eigen::Index d = m.dim();
    Matrix xs(static_cast<Eigen::Index>(budget), d);
    std::vector<double> lw(budget);
    for (std::size_t i = 0; i < budget; ++i) {
        const Vector x = envelope_draw(e, rng);
        xs.row(static_cast<Eigen::Index>(i)) = x.transpose();
        lw[i] = envelope_log_ratio(e, *p, m, x);
    }
    const double mx = *std::max_element(lw.begin(), lw.end());
    Vector w(static_cast<Eigen::Index>(budget));
    for (std::size_t i = 0; i < budget; ++i) w[static_cast<Eigen::Index>(i)] = std::exp(lw[i] - mx);
    w /= w.sum();
    const double ess = 1.0 / w.squaredNorm();
    if (ess < opts.min_ess_fraction * static_cast<double>(budget))
        throw EstimatorError("posterior_moments: importance weights collapsed (ESS " + std::to_string(ess) + ")",
                             ess);
    Moments out;
    out.mean = xs.transpose() * w;
    const Matrix r = xs.rowwise() - out.mean.transpose();
    out.cov = r.transpose() * w.asDiagonal() * r;
    out.std_error = std::sqrt((w.array().square() * r.rowwise().squaredNorm().array()).sum());
    out.ess = ess;
    return out;
}

Vector tilted_mean(const TargetMeasure& base, const Vector& c, double t) {
    if (const auto* g = base.gaussian()) return gauss_post_scalar(*g, c, t, false).mean;
    if (const auto* mix = base.mixture()) {
        const MixPost mp = mix_post(*mix, c, Regularizer(t), false);
        Vector mean = Vector::Zero(base.dim());
        for (std::size_t k = 0; k < mp.comps.size(); ++k) mean += mp.probs[k] * mp.comps[k].mean;
        return mean;
    }
    throw UnsupportedError("tilted_mean: generic base has no closed form");
}

Matrix sample(const TiltedMeasure& m, std::size_t n, Stream& rng, const SamplerOptions& opts) {
    const Eigen::Index d = m.dim();
    Matrix out(static_cast<Eigen::Index>(n), d);
    if (const auto* g = m.base().gaussian()) {
        const GaussPost p = gauss_post(*g, m.c(), m.reg(), true);
        const Matrix l = Eigen::LLT<Matrix>(p.cov).matrixL();
        for (std::size_t i = 0; i < n; ++i)
            out.row(static_cast<Eigen::Index>(i)) = (p.mean + l * rng.normal_vector(d)).transpose();
        return out;
    }
    if (const auto* mix = m.base().mixture()) {
        const MixPost mp = mix_post(*mix, m.c(), m.reg(), true);
        std::vector<Matrix> ls;
        for (const auto& c : mp.comps) ls.push_back(Eigen::LLT<Matrix>(c.cov).matrixL());
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = pick(mp.probs, rng.uniform());
            out.row(static_cast<Eigen::Index>(i)) = (mp.comps[k].mean + ls[k] * rng.normal_vector(d)).transpose();
        }
        return out;
    }
    if (!m.reg().is_scalar())
        if (auto s = m.reg().as_identity_multiple())
            return sample(TiltedMeasure(m.base(), m.c(), Regularizer(*s)), n, rng, opts);
    const auto* p = m.base().generic();
    const Envelope e = make_envelope(m, *p);
    for (std::size_t i = 0; i < n; ++i)
        out.row(static_cast<Eigen::Index>(i)) = rejection_draw(e, *p, m, rng, opts.max_tries).transpose();
    return out;
}

Vector sample_one(const TiltedMeasure& m, Stream& rng, const SamplerOptions& opts) {
    return sample(m, 1, rng, opts).row(0).transpose();
}

Vector sample_base(const TargetMeasure& base, Stream& rng, const SamplerOptions& opts) {
    const Eigen::Index d = base.dim();
    if (const auto* g = base.gaussian()) return g->mean() + g->chol() * rng.normal_vector(d);
    if (const auto* mix = base.mixture()) {
        std::vector<double> w;
        for (const auto& c : mix->components()) w.push_back(c.weight);
        const auto& c = mix->components()[pick(w, rng.uniform())].gaussian;
        return c.mean() + c.chol() * rng.normal_vector(d);
    }
    return sample_one(tilt(base, Vector::Zero(d), Regularizer(0.0)), rng, opts);
}

double log_partition(const TiltedMeasure& m) {
    if (const auto* g = m.base().gaussian()) return gauss_post(*g, m.c(), m.reg(), false).log_z;
    if (const auto* mix = m.base().mixture()) return mix_post(*mix, m.c(), m.reg(), false).log_z;
    throw UnsupportedError("log_partition: no closed form for a generic base");
}

GenericPotential builtin_potential(const std::string& name, Eigen::Index dim) {
    if (name == "gaussian")
        return GenericPotential(
            name, dim, [](const Vector& x) { return 0.5 * x.squaredNorm(); }, [](const Vector& x) { return x; }, 1.0,
            1.0);
    if (name == "quartic")
        return GenericPotential(
            name, dim, [](const Vector& x) { return 0.5 * x.squaredNorm() + 0.1 * x.array().pow(4).sum(); },
            [](const Vector& x) -> Vector { return x.array() + 0.4 * x.array().cube(); }, 1.0, 10.0);
    if (name == "logcosh")
        return GenericPotential(
            name, dim,
            [](const Vector& x) {
                // log cosh without overflow
                double s = 0.5 * x.squaredNorm();
                for (double v : x) s += std::abs(v) + std::log1p(std::exp(-2.0 * std::abs(v))) - std::numbers::ln2;
                return s;
            },
            [](const Vector& x) -> Vector { return x.array() + x.array().tanh(); }, 1.0, 2.0);
    throw DomainError("unknown builtin potential '" + name + "'");
}

std::vector<std::string> builtin_potential_names() { return {"gaussian", "quartic", "logcosh"}; }

}  // namespace sloc
