#include "sloc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sloc/error.hpp"

namespace sloc {

namespace {

// λ − 1 − log λ without cancellation near λ = 1.
double kl_eig_term(double lambda) {
    const double e = lambda - 1.0;
    if (std::abs(e) < 1e-3) return e * e * (0.5 - e * (1.0 / 3.0 - e * (0.25 - e * 0.2)));
    return e - std::log1p(e);
}

}  // namespace

double gaussian_kl(const Vector& m1, const Matrix& s1, const Vector& m2, const Matrix& s2) {
    const Eigen::Index d = m1.size();
    if (m2.size() != d || s1.rows() != d || s1.cols() != d || s2.rows() != d || s2.cols() != d)
        throw DimensionError("gaussian_kl: dimension mismatch");
    Eigen::LLT<Matrix> l2(s2);
    if (l2.info() != Eigen::Success) throw DomainError("gaussian_kl: second covariance is singular");
    if (Eigen::LLT<Matrix>(s1).info() != Eigen::Success)
        throw DomainError("gaussian_kl: first covariance is not positive definite");
    // eigenvalues of Σ₂⁻¹Σ₁
    const Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(s1, s2, Eigen::EigenvaluesOnly);
    double cov_part = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) cov_part += kl_eig_term(ges.eigenvalues()[i]);
    const Vector dm = m2 - m1;
    return 0.5 * (cov_part + dm.dot(l2.solve(dm)));
}

double kolmogorov_q(double lambda) {
    if (lambda < 0.2) return 1.0;
    double sum = 0.0, sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
        sum += term;
        if (std::abs(term) < 1e-16) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

TwoSampleResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.size() < 25 || b.size() < 25) throw DomainError("ks_two_sample: need at least 25 values per sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double dmax = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        dmax = std::max(dmax, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
    }
    const double en = std::sqrt(n * m / (n + m));
    return {dmax, kolmogorov_q((en + 0.12 + 0.11 / en) * dmax), a.size(), b.size()};
}

namespace {

// Standard error of the mean of z by non-overlapping batch means.
double batch_std_error(const std::vector<double>& z, std::size_t batches) {
    const std::size_t n = z.size();
    batches = std::clamp<std::size_t>(batches, 2, std::max<std::size_t>(2, n / 2));
    const std::size_t len = n / batches;
    if (len == 0) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> bm(batches, 0.0);
    for (std::size_t b = 0; b < batches; ++b) {
        for (std::size_t k = 0; k < len; ++k) bm[b] += z[b * len + k];
        bm[b] /= static_cast<double>(len);
    }
    double mean = 0.0;
    for (double v : bm) mean += v;
    mean /= static_cast<double>(batches);
    double var = 0.0;
    for (double v : bm) var += (v - mean) * (v - mean);
    var /= static_cast<double>(batches - 1);
    return std::sqrt(var / static_cast<double>(batches));
}

double mean_of(const std::vector<double>& z) {
    double s = 0.0;
    for (double v : z) s += v;
    return s / static_cast<double>(z.size());
}

}  // namespace

std::vector<MomentZ> moment_check(const std::vector<double>& samples, const std::vector<double>& reference,
                                  std::size_t batches) {
    if (samples.size() < 4) throw DomainError("moment_check: need at least 4 samples");
    std::vector<MomentZ> out;
    for (std::size_t p = 1; p <= reference.size(); ++p) {
        if (!std::isfinite(reference[p - 1])) throw DomainError("moment_check: reference moment is not finite");
        std::vector<double> z(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) z[i] = std::pow(samples[i], static_cast<double>(p));
        const double emp = mean_of(z);
        const double se = batch_std_error(z, batches);
        const double diff = emp - reference[p - 1];
        double score;
        if (se > 0.0)
            score = diff / se;
        else
            score = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
        out.push_back({static_cast<int>(p), emp, reference[p - 1], se, score});
    }
    return out;
}

SampleSummary summarize(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    if (x.size() < 2) throw DomainError("summarize: need at least 2 samples");
    const double mean = mean_of(x);
    double m2 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double r = (v - mean) * (v - mean);
        m2 += r;
        m4 += r * r;
    }
    const double var = m2 / (n - 1.0);
    m2 /= n;
    m4 /= n;
    return {mean, var, std::sqrt(var / n), std::sqrt(std::max(0.0, m4 - m2 * m2) / n)};
}

double two_sample_mean_z(const SampleSummary& a, const SampleSummary& b) {
    return (a.mean - b.mean) / std::hypot(a.mean_std_error, b.mean_std_error);
}

double two_sample_var_z(const SampleSummary& a, const SampleSummary& b) {
    return (a.var - b.var) / std::hypot(a.var_std_error, b.var_std_error);
}

EntropyEstimate entropy_plugin(const Matrix& samples, const std::function<double(const Vector&)>& log_f,
                               double log_partition, std::size_t batches) {
    const std::size_t n = static_cast<std::size_t>(samples.rows());
    if (n < 4) throw DomainError("entropy_plugin: need at least 4 samples");
    std::vector<double> w(n), wl(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double lf = log_f(samples.row(static_cast<Eigen::Index>(i)).transpose()) - log_partition;
        w[i] = std::exp(lf);
        wl[i] = w[i] * lf;
    }
    const double b = mean_of(w);
    const double a = mean_of(wl);
    const double lb = std::log(b);
    // delta method: Ent = a − b log b has gradient (1, −(log b + 1))
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = wl[i] - (lb + 1.0) * w[i];
    return {a - b * lb, batch_std_error(z, batches)};
}

}  // namespace sloc
