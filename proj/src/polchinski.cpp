#include "sloc/polchinski.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "sloc/error.hpp"

namespace sloc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_tau(double tau) {
    if (!(tau >= 0.0 && tau < 1.0)) throw DomainError("tau must lie in [0, 1)");
}

}  // namespace

TiltedMeasure fluctuation_measure(const TargetMeasure& base, double tau, const Vector& v) {
    check_tau(tau);
    return tilt(base, v / (1.0 - tau), Regularizer(tau / (1.0 - tau)));
}

RenormValue renorm_potential(const TargetMeasure& base, double tau, const Vector& x) {
    if (!base.tractable()) throw UnsupportedError("renorm_potential: generic base needs a budget and stream");
    const TiltedMeasure fm = fluctuation_measure(base, tau, x);
    const Moments mo = posterior_moments(fm);
    const double d = static_cast<double>(base.dim());
    const double one = 1.0 - tau;
    RenormValue r;
    r.value = 0.5 * d * (kLog2Pi + std::log(one)) + x.squaredNorm() / (2.0 * one) - log_partition(fm);
    r.gradient = (x - mo.mean) / one;
    return r;
}

RenormValue renorm_potential(const TargetMeasure& base, double tau, const Vector& x, std::size_t budget, Stream& rng) {
    if (base.tractable()) return renorm_potential(base, tau, x);
    check_tau(tau);
    if (budget == 0) throw DomainError("renorm_potential: budget must be positive");
    const auto& p = *base.generic();
    const double sd = std::sqrt(1.0 - tau);
    std::vector<double> e(budget);
    for (std::size_t i = 0; i < budget; ++i) {
        const Vector y = x + sd * rng.normal_vector(x.size());
        e[i] = -(p.value(y) - 0.5 * y.squaredNorm());
    }
    const double mx = *std::max_element(e.begin(), e.end());
    double s = 0.0;
    for (double v : e) s += std::exp(v - mx);
    RenormValue r;
    r.value = -(mx + std::log(s / static_cast<double>(budget)));
    const Moments mo = posterior_moments(fluctuation_measure(base, tau, x), budget, rng);
    r.gradient = (x - mo.mean) / (1.0 - tau);
    return r;
}

SamplePath polchinski_run(const TargetMeasure& base, const TimeGrid& tau_grid, const SamplePath& noise,
                          const PolchinskiOptions& opts) {
    const Eigen::Index d = base.dim();
    if (!(noise.grid == tau_grid)) throw DimensionError("polchinski_run: noise path lives on a different grid");
    if (noise.dim() != d) throw DimensionError("polchinski_run: noise dimension does not match the base");
    if (tau_grid.back() > 1.0 - opts.eps_clip * (1.0 - 1e-12))
        throw DomainError("polchinski_run: tau grid must end at or below 1 - eps_clip");
    Stream inner(noise.seed, noise.stream_id, Lane::inner);
    Matrix out(static_cast<Eigen::Index>(tau_grid.size()), d);
    Vector v = Vector::Zero(d);
    out.row(0) = v.transpose();
    for (std::size_t k = 0; k < tau_grid.steps(); ++k) {
        const double tau = tau_grid[k], dtau = tau_grid[k + 1] - tau;
        const double one = 1.0 - tau;
        Vector m;
        if (base.tractable())
            m = tilted_mean(base, v / one, tau / one);
        else
            m = posterior_moments(fluctuation_measure(base, tau, v), opts.budget, inner).mean;
        v = v - (v - m) / one * dtau + noise.increment(k);
        if (!v.allFinite()) throw NonFiniteError("polchinski_run: non-finite state", k + 1);
        out.row(static_cast<Eigen::Index>(k + 1)) = v.transpose();
    }
    return {tau_grid, std::move(out), noise.seed, noise.stream_id};
}

double LsiSchedule::lambda(double tau) const { return (alpha - 1.0) / ((1.0 - tau) * alpha + tau); }

double LsiSchedule::Lambda(double tau) const { return std::log((1.0 - alpha) * tau + alpha); }

double LsiSchedule::inv_gamma(double tau) const { return tau * ((1.0 - alpha) * tau + alpha) / alpha; }

double LsiSchedule::gamma(double tau) const {
    const double ig = inv_gamma(tau);
    return ig == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / ig;
}

LsiSchedule lsi_schedule(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("lsi_schedule: alpha must be > 0");
    return LsiSchedule{alpha};
}

double stability_factor(double alpha, double tau) {
    if (!(alpha > 0.0)) throw DomainError("stability_factor: alpha must be > 0");
    check_tau(tau);
    return alpha * (1.0 - tau) / (alpha * (1.0 - tau) + tau);
}

void write_schedule_csv(std::ostream& os, const LsiSchedule& s, const std::vector<double>& taus) {
    os << "tau,lambda,Lambda,gamma,factor\n";
    os.precision(17);
    for (double tau : taus) {
        const double factor = tau < 1.0 ? stability_factor(s.alpha, tau) : 0.0;
        os << tau << ',' << s.lambda(tau) << ',' << s.Lambda(tau) << ',' << s.gamma(tau) << ',' << factor << '\n';
    }
}

}  // namespace sloc
