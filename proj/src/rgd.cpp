#include "sloc/rgd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "sloc/diagnostics.hpp"
#include "sloc/error.hpp"

namespace sloc {

namespace {

void check_cfg(const RgdConfig& cfg, const Vector& x) {
    if (!(cfg.eta > 0.0)) throw DomainError("rgd: eta must be > 0");
    if (x.size() != cfg.target.dim()) throw DimensionError("rgd: state dimension does not match the target");
    if (cfg.inner == InnerSampler::exact && !cfg.target.tractable())
        throw DomainError("rgd: the exact inner sampler needs a Gaussian or mixture target");
}

double log_sum_exp(const std::vector<double>& v) {
    const double mx = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

}  // namespace

Vector rgd_step(const Vector& x, const RgdConfig& cfg, Stream& rng) {
    check_cfg(cfg, x);
    const Vector y = x + std::sqrt(cfg.eta) * rng.normal_vector(x.size());
    return sample_one(tilt(cfg.target, y / cfg.eta, Regularizer(1.0 / cfg.eta)), rng, {cfg.max_tries});
}

Vector rgd_step_channel(const Vector& x, const RgdConfig& cfg, Stream& rng) {
    check_cfg(cfg, x);
    const double t = 1.0 / cfg.eta;
    const Vector c = t * x + std::sqrt(t) * rng.normal_vector(x.size());
    return sample_one(tilt(cfg.target, c, Regularizer(t)), rng, {cfg.max_tries});
}

Matrix rgd_chain(const Vector& x0, const RgdConfig& cfg, std::uint64_t seed, std::uint64_t stream_id) {
    Stream rng(seed, stream_id, Lane::inner);
    Matrix out(static_cast<Eigen::Index>(cfg.steps + 1), x0.size());
    Vector x = x0;
    out.row(0) = x.transpose();
    for (std::size_t k = 0; k < cfg.steps; ++k) {
        x = rgd_step(x, cfg, rng);
        out.row(static_cast<Eigen::Index>(k + 1)) = x.transpose();
    }
    return out;
}

ChainLaw chain_law_propagate(const GaussianMeasure& init, const GaussianMeasure& target, double eta, std::size_t steps) {
    if (!(eta > 0.0)) throw DomainError("chain_law_propagate: eta must be > 0");
    const Eigen::Index d = target.dim();
    if (init.dim() != d) throw DimensionError("chain_law_propagate: dimension mismatch");
    const Matrix id = Matrix::Identity(d, d);
    const Matrix p = target.precision() + id / eta;
    const Matrix pinv = Eigen::LLT<Matrix>(p).solve(id);
    const Vector h0 = target.precision() * target.mean();
    ChainLaw law;
    law.means.push_back(init.mean());
    law.covs.push_back(init.cov());
    law.kl.push_back(gaussian_kl(init.mean(), init.cov(), target.mean(), target.cov()));
    for (std::size_t k = 0; k < steps; ++k) {
        const Matrix c1 = law.covs.back() + eta * id;
        const Vector m = pinv * (h0 + law.means.back() / eta);
        Matrix c = pinv + pinv * c1 * pinv / (eta * eta);
        c = 0.5 * (c + c.transpose());
        law.means.push_back(m);
        law.covs.push_back(c);
        law.kl.push_back(gaussian_kl(m, c, target.mean(), target.cov()));
        const double prev = law.kl[law.kl.size() - 2];
        law.ratios.push_back(prev == 0.0 ? std::numeric_limits<double>::quiet_NaN() : law.kl.back() / prev);
    }
    return law;
}

double lsi_lower_bound(double alpha, double eta) {
    if (!(alpha > 0.0) || !(eta > 0.0)) throw DomainError("lsi_lower_bound: alpha and eta must be > 0");
    return alpha / (alpha + 1.0 / eta);
}

bool StabilityReport::all_pass() const {
    return std::all_of(pass.begin(), pass.end(), [](bool b) { return b; });
}

StabilityReport entropic_stability_probe(const TargetMeasure& target, const Matrix& probes, double alpha_claim) {
    if (!target.tractable()) throw UnsupportedError("entropic_stability_probe: needs closed-form tilts");
    if (probes.cols() != target.dim()) throw DimensionError("entropic_stability_probe: probe dimension mismatch");
    const Eigen::Index d = target.dim();
    StabilityReport rep;
    rep.probes = probes;
    rep.alpha_used = alpha_claim;
    if (const auto* g = target.gaussian()) rep.sharp_alpha = g->eigenvalues().maxCoeff();
    const Vector b0 = posterior_moments(tilt(target, Vector::Zero(d), Regularizer(0.0))).mean;
    for (Eigen::Index i = 0; i < probes.rows(); ++i) {
        const Vector y = probes.row(i).transpose();
        const TiltedMeasure ty = tilt(target, y, Regularizer(0.0));
        const Vector b = posterior_moments(ty).mean;
        const double kl = y.dot(b) - log_partition(ty);
        if (!std::isfinite(kl)) throw Error("entropic_stability_probe: non-finite KL");
        const double lhs = 0.5 * (b - b0).squaredNorm();
        const double rhs = alpha_claim * kl;
        rep.lhs.push_back(lhs);
        rep.rhs.push_back(rhs);
        rep.pass.push_back(lhs <= rhs + 1e-12 * std::max(1.0, std::abs(rhs)));
        if (rep.sharp_alpha) rep.sharp_rhs.push_back(*rep.sharp_alpha * kl);
    }
    return rep;
}

ContractionEstimate heat_flow_contraction_mc(const TargetMeasure& target, const GaussianMeasure& init, double eta,
                                             std::size_t n_paths, std::uint64_t seed, const ContractionOptions& opts) {
    if (!(eta > 0.0)) throw DomainError("heat_flow_contraction_mc: eta must be > 0");
    if (init.dim() != target.dim()) throw DimensionError("heat_flow_contraction_mc: dimension mismatch");
    if (const auto* g = target.gaussian()) {
        const ChainLaw law = chain_law_propagate(init, *g, eta, 1);
        return {law.ratios[0], 0.0, law.kl[0], law.kl[1], true};
    }
    const auto* p = target.generic();
    if (!p) throw UnsupportedError("heat_flow_contraction_mc: needs a Gaussian or generic target");
    if (!(p->alpha() > 0.0)) throw DomainError("heat_flow_contraction_mc: target needs alpha > 0");
    if (p->dim() != 1) throw UnsupportedError("heat_flow_contraction_mc: generic targets only in dimension 1");
    if (n_paths < 2) throw DomainError("heat_flow_contraction_mc: need at least 2 paths");

    const double m0 = init.mean()[0], s0 = std::sqrt(init.cov()(0, 0));
    const double sy = std::sqrt(init.cov()(0, 0) + eta);
    const std::size_t npts = std::max<std::size_t>(opts.grid_points, 101);
    auto V = [&](double x) { return p->value(Vector::Constant(1, x)); };

    // x-grid wide enough for the target and every tilt reached from the y-grid
    const double half = 12.0 * std::max({s0, sy, 1.0 / std::sqrt(p->alpha())});
    const double xlo = std::min(m0, 0.0) - half, xhi = std::max(m0, 0.0) + half;
    const double hx = (xhi - xlo) / static_cast<double>(npts - 1);
    std::vector<double> xs(npts), vx(npts);
    for (std::size_t i = 0; i < npts; ++i) {
        xs[i] = xlo + hx * static_cast<double>(i);
        vx[i] = V(xs[i]);
    }
    auto trapz_log = [&](const std::vector<double>& lv, double h) {
        std::vector<double> w(lv);
        w.front() += std::log(0.5);
        w.back() += std::log(0.5);
        return log_sum_exp(w) + std::log(h);
    };
    std::vector<double> tmp(npts);
    for (std::size_t i = 0; i < npts; ++i) tmp[i] = -vx[i];
    const double log_zpi = trapz_log(tmp, hx);

    // KL(μ₀‖π) by quadrature
    double kl0 = 0.0;
    for (std::size_t i = 0; i < npts; ++i) {
        const double lq = init.log_density(Vector::Constant(1, xs[i]));
        const double w = (i == 0 || i + 1 == npts) ? 0.5 : 1.0;
        kl0 += w * std::exp(lq) * (lq - (-vx[i] - log_zpi));
    }
    kl0 *= hx;
    if (!(kl0 > 1e-12)) throw EstimatorError("heat_flow_contraction_mc: initial KL is zero", kl0);

    // y ∼ N(m0, s0² + η); log Z(y) = log ∫ exp(−V(x) − (x−y)²/(2η)) dx
    const double ylo = m0 - 12.0 * sy, yhi = m0 + 12.0 * sy;
    const double hy = (yhi - ylo) / static_cast<double>(npts - 1);
    std::vector<double> ys(npts), log_wy(npts);
    for (std::size_t k = 0; k < npts; ++k) {
        ys[k] = ylo + hy * static_cast<double>(k);
        for (std::size_t i = 0; i < npts; ++i) tmp[i] = -vx[i] - (xs[i] - ys[k]) * (xs[i] - ys[k]) / (2.0 * eta);
        const double log_zy = trapz_log(tmp, hx);
        const double r = (ys[k] - m0) / sy;
        const double edge = (k == 0 || k + 1 == npts) ? std::log(0.5) : 0.0;
        log_wy[k] = -0.5 * r * r - std::log(sy) - 0.5 * std::log(2.0 * std::numbers::pi) - log_zy + edge + std::log(hy);
    }
    // log μ₁(x) − log π(x) = log ∫ N(y; m0, s0²+η) exp(−(x−y)²/(2η))/Z(y) dy + log Z_π
    auto log_ratio = [&](double x) {
        for (std::size_t k = 0; k < npts; ++k) tmp[k] = log_wy[k] - (x - ys[k]) * (x - ys[k]) / (2.0 * eta);
        return log_sum_exp(tmp) + log_zpi;
    };

    RgdConfig cfg{eta, target, InnerSampler::rejection, opts.max_tries, 1};
    std::vector<double> vals(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) {
        Stream rng(seed, i, Lane::inner);
        const Vector x0 = init.mean() + init.chol() * rng.normal_vector(1);
        const Vector x1 = rgd_step(x0, cfg, rng);
        vals[i] = log_ratio(x1[0]);
    }
    const SampleSummary s = summarize(vals);
    ContractionEstimate est{s.mean / kl0, s.mean_std_error / kl0, kl0, s.mean, false};
    if (est.std_error > opts.max_rel_std_error * std::abs(est.ratio))
        throw EstimatorError("heat_flow_contraction_mc: Monte Carlo error too large relative to the ratio",
                             est.std_error / std::abs(est.ratio));
    return est;
}

void write_chain_csv(std::ostream& os, const Matrix& chain, const std::vector<double>* kl) {
    os << "iteration";
    for (Eigen::Index j = 0; j < chain.cols(); ++j) os << ",x_" << (j + 1);
    if (kl) os << ",kl";
    os << '\n';
    os.precision(17);
    for (Eigen::Index k = 0; k < chain.rows(); ++k) {
        os << k;
        for (Eigen::Index j = 0; j < chain.cols(); ++j) os << ',' << chain(k, j);
        if (kl && static_cast<std::size_t>(k) < kl->size()) os << ',' << (*kl)[static_cast<std::size_t>(k)];
        os << '\n';
    }
}

}  // namespace sloc
