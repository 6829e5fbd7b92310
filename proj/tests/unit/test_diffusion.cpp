#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "sloc/diagnostics.hpp"
#include "sloc/diffusion.hpp"
#include "sloc/error.hpp"

using namespace sloc;

namespace {

Vector v1(double x) { return Vector::Constant(1, x); }

// log ν(y) for y = s·x + N(0, σ²), x with density exp(log_pi)
double log_nu(const std::function<double(double)>& log_pi, const NoisyChannelSpec& sp, double y) {
    return std::log(oracle::integrate(
        [&](double x) { return std::exp(log_pi(x)) * oracle::normal_pdf(y, sp.s * x, sp.sigma2); }, -30, 30));
}

double fd_score(const std::function<double(double)>& log_pi, const NoisyChannelSpec& sp, double y) {
    const double h = 1e-4;
    return (log_nu(log_pi, sp, y + h) - log_nu(log_pi, sp, y - h)) / (2 * h);
}

}  // namespace

TEST_CASE("ou marginal parameters") {
    for (double t : {0.01, 0.5, 3.0}) {
        const auto p = ou_marginal_params(t);
        CHECK(p.s * p.s + p.sigma2 == doctest::Approx(1.0).epsilon(1e-14));
        const double u = ou_backward_map().forward(t);
        const auto q = ou_marginal_at_backward_time(u);
        CHECK(q.s == doctest::Approx(p.s).epsilon(1e-12));
        CHECK(q.sigma2 == doctest::Approx(p.sigma2).epsilon(1e-12));
    }
    CHECK(ou_marginal_params(INFINITY).s == 0.0);
    CHECK_THROWS_AS(ou_marginal_params(-1.0), DomainError);
    CHECK_THROWS_AS(ou_marginal_at_backward_time(0.0), DomainError);
}

TEST_CASE("tweedie score matches a finite difference of the quadrature log density") {
    const TargetMeasure mix(GaussianMixture({{0.4, GaussianMeasure(v1(-1.5), Matrix::Constant(1, 1, 0.3))},
                                             {0.6, GaussianMeasure(v1(1.0), Matrix::Constant(1, 1, 0.8))}}));
    auto lp = [&](double x) { return mix.log_density(v1(x)); };
    for (double t : {0.05, 0.7, 2.0}) {
        const auto sp = ou_marginal_params(t);
        for (double y : {-2.0, 0.1, 1.3}) {
            const double s = tweedie_score(mix, sp, v1(y))[0];
            CHECK(s == doctest::Approx(fd_score(lp, sp, y)).epsilon(1e-6));
        }
    }
    const TargetMeasure g(GaussianMeasure(v1(0.7), Matrix::Constant(1, 1, 2.0)));
    const NoisyChannelSpec sp{0.6, 0.64};
    CHECK(tweedie_score(g, sp, v1(1.1))[0] == doctest::Approx(-(1.1 - 0.6 * 0.7) / (0.36 * 2.0 + 0.64)).epsilon(1e-13));
    CHECK_THROWS_AS(tweedie_score(g, {1.0, 0.0}, v1(0.0)), DomainError);
}

TEST_CASE("importance-sampled score for a generic potential") {
    const auto q4 = builtin_potential("quartic", 1);
    const TargetMeasure base(q4);
    auto lp = [&](double x) { return -q4.value(v1(x)); };
    const auto sp = ou_marginal_params(0.4);
    Stream r(3, 0);
    const double s = tweedie_score(base, sp, v1(0.8), 40000, r)[0];
    CHECK(s == doctest::Approx(fd_score(lp, sp, 0.8)).epsilon(0.02));
}

TEST_CASE("backward sde ends near the target law") {
    const double mu = 1.0, var = 0.5;
    const TargetMeasure base(GaussianMeasure(v1(mu), Matrix::Constant(1, 1, var)));
    const auto g = TimeGrid::geometric(1e-3, 100.0, 400);
    std::vector<double> end;
    for (std::uint64_t s = 0; s < 1500; ++s)
        end.push_back(backward_sde_run(base, g, wiener_increments(g, 1, 77, s), {1e-3, 100}).back().x[0]);
    const auto q = ou_marginal_at_backward_time(100.0);
    const auto sm = summarize(end);
    CHECK(std::abs(sm.mean - q.s * mu) <= 4 * sm.mean_std_error + 0.03);
    CHECK(std::abs(sm.var - (q.s * q.s * var + q.sigma2)) <= 4 * sm.var_std_error + 0.03);
}

TEST_CASE("backward sde bookkeeping") {
    const TargetMeasure base(GaussianMeasure(Vector::Zero(2), Matrix::Identity(2, 2)));
    const auto g = TimeGrid::uniform(0.01, 1.0, 10);
    CHECK_THROWS_AS(backward_sde_run(base, g, wiener_increments(g, 2, 1, 1), {0.1, 10}), DomainError);
    CHECK_THROWS_AS(backward_sde_run(base, g, wiener_increments(g, 1, 1, 1)), DimensionError);
    const auto run = backward_sde_run(base, g, wiener_increments(g, 2, 1, 1), {0.01, 10});
    CHECK(run.size() == 11);
    const auto tc = rescale_to_tilt(run.back());
    CHECK(tc.t == 1.0);
    CHECK((tc.c - std::sqrt(2.0) * run.back().x).norm() <= 1e-15);
}
