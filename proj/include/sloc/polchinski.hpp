#pragma once

#include <iosfwd>
#include <vector>

#include "sloc/sde.hpp"
#include "sloc/targets.hpp"

namespace sloc {

inline constexpr double kDefaultPolchinskiClip = 1e-3;

struct RenormValue {
    double value;
    Vector gradient;
};

/// V_τ(x) = −log E_{z∼N(0,(1−τ)I)} exp(−V₁(x+z)) with V₁ = −log π − ½‖·‖² and π the
/// normalized base density (unnormalized exp(−V) for generic bases). Gradient (x − m_τ)/(1−τ).
RenormValue renorm_potential(const TargetMeasure& base, double tau, const Vector& x);
/// Generic bases: value by Monte Carlo over z, gradient from the IS fluctuation mean.
RenormValue renorm_potential(const TargetMeasure& base, double tau, const Vector& x, std::size_t budget, Stream& rng);

/// tilt(base, v/(1−τ), τ/(1−τ)).
TiltedMeasure fluctuation_measure(const TargetMeasure& base, double tau, const Vector& v);

struct PolchinskiOptions {
    double eps_clip = kDefaultPolchinskiClip;
    std::size_t budget = 2000;
};

/// Euler–Maruyama for dv = −(v − m_τ)/(1−τ) dτ + dW, v₀ = 0.
SamplePath polchinski_run(const TargetMeasure& base, const TimeGrid& tau_grid, const SamplePath& noise,
                          const PolchinskiOptions& opts = {});

struct LsiSchedule {
    double alpha;

    double lambda(double tau) const;
    double Lambda(double tau) const;
    double gamma(double tau) const;
    double inv_gamma(double tau) const;
};

LsiSchedule lsi_schedule(double alpha);

/// α(1−τ)/(α(1−τ)+τ).
double stability_factor(double alpha, double tau);

/// CSV rows (tau, lambda, Lambda, gamma, factor).
void write_schedule_csv(std::ostream& os, const LsiSchedule& s, const std::vector<double>& taus);

}  // namespace sloc
