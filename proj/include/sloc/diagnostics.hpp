#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "sloc/types.hpp"

namespace sloc {

/// ½[tr(Σ₂⁻¹Σ₁) + (m₂−m₁)ᵀΣ₂⁻¹(m₂−m₁) − d + log det Σ₂ − log det Σ₁].
double gaussian_kl(const Vector& m1, const Matrix& s1, const Vector& m2, const Matrix& s2);

struct TwoSampleResult {
    double statistic;
    double p_value;
    std::size_t n;
    std::size_t m;
};

/// Asymptotic Kolmogorov tail Q(λ) = 2Σ(−1)^{k−1}e^{−2k²λ²}.
double kolmogorov_q(double lambda);

/// Two-sample KS with the asymptotic p-value at λ = (√e + 0.12 + 0.11/√e)·D, e = nm/(n+m).
/// Throws DomainError when either sample has fewer than 25 values.
TwoSampleResult ks_two_sample(std::vector<double> a, std::vector<double> b);

struct MomentZ {
    int order;
    double empirical;
    double reference;
    double std_error;
    double z;
};

/// Raw moments E[x^p], p = 1..reference.size(), z-scored with batch-means standard errors.
std::vector<MomentZ> moment_check(const std::vector<double>& samples, const std::vector<double>& reference,
                                  std::size_t batches = 50);

struct SampleSummary {
    double mean;
    double var;
    double mean_std_error;
    double var_std_error;
};

/// Mean and unbiased variance with iid standard errors (the variance one via the fourth central moment).
SampleSummary summarize(const std::vector<double>& x);

/// z for comparing two independent sample means or variances.
double two_sample_mean_z(const SampleSummary& a, const SampleSummary& b);
double two_sample_var_z(const SampleSummary& a, const SampleSummary& b);

struct EntropyEstimate {
    double value;
    double std_error;
};

/// Ent[f] = E f log f − E f log E f with f = exp(log_f − log_partition) over the given samples.
EntropyEstimate entropy_plugin(const Matrix& samples, const std::function<double(const Vector&)>& log_f,
                               double log_partition = 0.0, std::size_t batches = 50);

}  // namespace sloc
