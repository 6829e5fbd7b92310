#include "sloc/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "sloc/error.hpp"

namespace sloc {

namespace {

// Fixed reduction order keeps results independent of any internal parallelism.
double lse(const Eigen::Ref<const Vector>& v) {
    const double mx = v.maxCoeff();
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - mx);
    return mx + std::log(s);
}

void check_weights(const Vector& w, const char* what) {
    if (w.size() < 1) throw DomainError(std::string(what) + ": empty measure");
    if ((w.array() <= 0.0).any() || !w.allFinite()) throw DomainError(std::string(what) + ": weights must be positive");
    if (std::abs(w.sum() - 1.0) > 1e-12) throw DomainError(std::string(what) + ": weights must sum to 1");
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(Matrix pts, Vector w) : points(std::move(pts)), weights(std::move(w)) {
    if (points.rows() != weights.size()) throw DimensionError("discrete measure: points/weights size mismatch");
    check_weights(weights, "discrete measure");
}

double DiscreteCoupling::marginal_residual() const {
    const double r = (gamma.rowwise().sum() - row_target).cwiseAbs().sum();
    const double c = (gamma.colwise().sum().transpose() - col_target).cwiseAbs().sum();
    return std::max(r, c);
}

Matrix log_reference_kernel(const DiscreteMeasure& mu, const DiscreteMeasure& pi) {
    if (mu.points.cols() != pi.points.cols()) throw DimensionError("reference kernel: support dimensions differ");
    Matrix lk(mu.size(), pi.size());
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        for (Eigen::Index j = 0; j < pi.size(); ++j)
            lk(i, j) = -0.5 * (mu.points.row(i) - pi.points.row(j)).squaredNorm();
        const Vector row = lk.row(i).transpose();
        lk.row(i).array() += std::log(mu.weights[i]) - lse(row);
    }
    return lk;
}

Matrix reference_kernel(const DiscreteMeasure& mu, const DiscreteMeasure& pi) {
    return log_reference_kernel(mu, pi).array().exp();
}

SinkhornResult sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& pi, const Matrix& ref_kernel, double tol,
                        std::size_t max_iter) {
    if (ref_kernel.rows() != mu.size() || ref_kernel.cols() != pi.size())
        throw DimensionError("sinkhorn: kernel shape does not match the marginals");
    if (!((ref_kernel.array() > 0.0).all())) throw DomainError("sinkhorn: kernel has a non-positive entry");
    return sinkhorn_log(mu.weights, pi.weights, ref_kernel.array().log().matrix(), tol, max_iter);
}

SinkhornResult sinkhorn_log(const Vector& mu, const Vector& pi, const Matrix& lk, double tol, std::size_t max_iter) {
    check_weights(mu, "sinkhorn mu");
    check_weights(pi, "sinkhorn pi");
    if (lk.rows() != mu.size() || lk.cols() != pi.size())
        throw DimensionError("sinkhorn: kernel shape does not match the marginals");
    if (!lk.allFinite()) throw DomainError("sinkhorn: kernel has a zero or non-finite entry");
    if (!(tol > 0.0)) throw DomainError("sinkhorn: tol must be positive");
    const Eigen::Index n = mu.size(), m = pi.size();
    const Vector lmu = mu.array().log(), lpi = pi.array().log();
    SinkhornResult r;
    r.log_f = Vector::Zero(n);
    r.log_g = Vector::Zero(m);
    Matrix lgam(n, m);
    auto assemble = [&] {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < m; ++j) lgam(i, j) = lk(i, j) + r.log_f[i] + r.log_g[j];
        r.coupling = {lgam.array().exp().matrix(), mu, pi};
        r.residual = r.coupling.marginal_residual();
    };
    for (std::size_t it = 0; it < std::max<std::size_t>(max_iter, 1); ++it) {
        for (Eigen::Index j = 0; j < m; ++j) r.log_g[j] = lpi[j] - lse(lk.col(j) + r.log_f);
        for (Eigen::Index i = 0; i < n; ++i) r.log_f[i] = lmu[i] - lse(lk.row(i).transpose() + r.log_g);
        r.iterations = it + 1;
        assemble();
        r.trace.push_back(r.residual);
        if (r.residual <= tol) {
            r.converged = true;
            break;
        }
    }
    r.f = r.log_f.array().exp();
    r.g = r.log_g.array().exp();
    return r;
}

ObjectivePair objective_pair(const DiscreteCoupling& c, const DiscreteMeasure& mu, const DiscreteMeasure& pi,
                             const Matrix& ref) {
    const Matrix& g = c.gamma;
    if (g.rows() != mu.size() || g.cols() != pi.size() || ref.rows() != g.rows() || ref.cols() != g.cols())
        throw DimensionError("objective_pair: shape mismatch");
    ObjectivePair out{0.0, 0.0, false};
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = 0; j < g.cols(); ++j) {
            const double v = g(i, j);
            if (v < 0.0) throw DomainError("objective_pair: negative coupling entry");
            out.eot += 0.5 * (mu.points.row(i) - pi.points.row(j)).squaredNorm() * v;
            if (v == 0.0) continue;
            if (ref(i, j) <= 0.0) {
                out.infinite = true;
                out.ssb = std::numeric_limits<double>::infinity();
            } else if (!out.infinite) {
                out.ssb += v * (std::log(v) - std::log(ref(i, j)));
            }
            out.eot += v * (std::log(v) - std::log(mu.weights[i]) - std::log(pi.weights[j]));
        }
    return out;
}

double schrodinger_residual(const SinkhornResult& r, const DiscreteMeasure& mu, const DiscreteMeasure& pi,
                            const Matrix& ref) {
    const Vector r0 = ref.rowwise().sum();
    const Vector r1 = ref.colwise().sum().transpose();
    const Vector eg = (ref * r.g).array() / r0.array();
    const Vector ef = (ref.transpose() * r.f).array() / r1.array();
    const double row = (r.f.array() * eg.array() - mu.weights.array() / r0.array()).abs().maxCoeff();
    const double col = (r.g.array() * ef.array() - pi.weights.array() / r1.array()).abs().maxCoeff();
    return std::max(row, col);
}

double three_time_markov_defect(const Vector& mu, const Matrix& k1, const Matrix& k2, const Vector& pi, double tol,
                                std::size_t max_iter) {
    if (k1.rows() != mu.size() || k1.cols() != k2.rows() || k2.cols() != pi.size())
        throw DimensionError("three_time_markov_defect: shape mismatch");
    const Matrix r01 = mu.asDiagonal() * k1 * k2;
    const SinkhornResult s = sinkhorn_log(mu, pi, r01.array().log().matrix(), tol, max_iter);
    const Vector g_mid = k2 * s.g;
    double defect = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i)
        for (Eigen::Index k = 0; k < k2.rows(); ++k) {
            // P*(i,k,j) = μ_i K1(i,k) K2(k,j) f_i g_j
            Vector joint(pi.size());
            for (Eigen::Index j = 0; j < pi.size(); ++j) joint[j] = mu[i] * k1(i, k) * k2(k, j) * s.f[i] * s.g[j];
            const Vector cond = joint / joint.sum();
            for (Eigen::Index j = 0; j < pi.size(); ++j)
                defect = std::max(defect, std::abs(cond[j] - s.g[j] * k2(k, j) / g_mid[k]));
        }
    return defect;
}

Vector FollmerDrift::operator()(double tau, const Vector& v, Stream& rng) const {
    const double one = 1.0 - tau;
    if (base_.tractable()) return (tilted_mean(base_, v / one, tau / one) - v) / one;
    return -renorm_potential(base_, tau, v, budget_, rng).gradient;
}

Vector follmer_sample(const TargetMeasure& base, const TimeGrid& tau_grid, const SamplePath& noise,
                      const PolchinskiOptions& opts) {
    const SamplePath p = polchinski_run(base, tau_grid, noise, opts);
    return p.states.row(p.states.rows() - 1).transpose();
}

EnergyEstimate girsanov_energy(const FollmerDrift& drift, const TimeGrid& tau_grid, std::size_t n_paths,
                               std::uint64_t seed, unsigned workers) {
    if (n_paths < 2) throw DomainError("girsanov_energy: need at least 2 paths");
    if (!(tau_grid.back() < 1.0)) throw DomainError("girsanov_energy: tau grid must stay below 1");
    const Eigen::Index d = drift.base().dim();
    std::vector<double> e(n_paths);
    parallel_for(n_paths, workers, [&](std::size_t p) {
        const SamplePath w = wiener_increments(tau_grid, d, seed, p);
        Stream inner(seed, p, Lane::inner);
        Vector v = Vector::Zero(d);
        double acc = 0.0;
        for (std::size_t k = 0; k < tau_grid.steps(); ++k) {
            const double dtau = tau_grid[k + 1] - tau_grid[k];
            const Vector u = drift(tau_grid[k], v, inner);
            acc += 0.5 * u.squaredNorm() * dtau;
            v = v + u * dtau + w.increment(k);
            if (!v.allFinite()) throw NonFiniteError("girsanov_energy: non-finite state", k + 1);
        }
        e[p] = acc;
    });
    double mean = 0.0;
    for (double x : e) mean += x;
    mean /= static_cast<double>(n_paths);
    double var = 0.0;
    for (double x : e) var += (x - mean) * (x - mean);
    var /= static_cast<double>(n_paths - 1);
    return {mean, std::sqrt(var / static_cast<double>(n_paths))};
}

void write_coupling_csv(std::ostream& os, const DiscreteCoupling& c) {
    os.precision(17);
    for (Eigen::Index i = 0; i < c.gamma.rows(); ++i) {
        for (Eigen::Index j = 0; j < c.gamma.cols(); ++j) os << (j ? "," : "") << c.gamma(i, j);
        os << '\n';
    }
}

}  // namespace sloc
