#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "sloc/diagnostics.hpp"
#include "sloc/error.hpp"
#include "sloc/localize.hpp"

using namespace sloc;

namespace {

TargetMeasure gauss2() {
    Matrix s(2, 2);
    s << 1.2, 0.5, 0.5, 0.9;
    return TargetMeasure(GaussianMeasure((Vector(2) << 0.4, -1.0).finished(), s));
}

TargetMeasure mix2() {
    const Matrix s = 0.3 * Matrix::Identity(2, 2);
    return TargetMeasure(GaussianMixture({{0.3, GaussianMeasure((Vector(2) << -1.5, 0.0).finished(), s)},
                                          {0.7, GaussianMeasure((Vector(2) << 1.0, 1.0).finished(), s)}}));
}

}  // namespace

TEST_CASE("tilt sde on a gaussian: the tilt has the channel law and the mean is a martingale") {
    const double mu = 0.8, var = 1.5, horizon = 1.0;
    const TargetMeasure base(GaussianMeasure(Vector::Constant(1, mu), Matrix::Constant(1, 1, var)));
    const auto g = TimeGrid::uniform(0.0, horizon, 200);
    std::vector<double> cT, mT;
    for (std::uint64_t s = 0; s < 2000; ++s) {
        const auto run = tilt_sde_run(base, g, wiener_increments(g, 1, 21, s));
        cT.push_back(run.back().c[0]);
        mT.push_back(run.back().m[0]);
        CHECK(run.back().m_std_error == 0.0);
    }
    const auto c = summarize(cT);
    const auto m = summarize(mT);
    CHECK(std::abs(c.mean - horizon * mu) <= 4 * c.mean_std_error);
    CHECK(std::abs(c.var - (horizon * horizon * var + horizon)) <= 4 * c.var_std_error + 0.02);
    CHECK(std::abs(m.mean - mu) <= 4 * m.mean_std_error);
    // Var m_T = Var x − E Var(x | c_T) = var − var/(1+T var)
    CHECK(std::abs(m.var - (var - var / (1 + horizon * var))) <= 4 * m.var_std_error + 0.01);
}

TEST_CASE("channel path") {
    const auto base = mix2();
    const auto g = TimeGrid::uniform(0.0, 2.0, 20);
    const auto a = channel_path(base, g, 3, 1);
    const auto b = channel_path(base, g, 3, 1);
    CHECK((a.c.states - b.c.states).norm() == 0.0);
    CHECK(a.c.states.row(0).norm() == 0.0);
    const auto w = wiener_increments(g, 2, 3, 1);
    CHECK((a.c.states.row(20) - (2.0 * a.x.transpose() + w.states.row(20))).norm() <= 1e-14);

    // the posterior mean concentrates on the hidden x
    const auto far = channel_path(base, TimeGrid({0.0, 1e6}), 3, 2);
    const Vector m = tilted_mean(base, far.c.state(1), 1e6);
    CHECK((m - far.x).norm() < 1e-2);

    // grids starting away from zero still see B_0 = 0
    const auto off = channel_path(base, TimeGrid({0.5, 1.0}), 3, 4);
    const auto full = channel_path(base, TimeGrid({0.0, 0.5, 1.0}), 3, 4);
    CHECK((off.c.states.row(1) - full.c.states.row(2)).norm() == 0.0);
}

TEST_CASE("particle cloud weights equal the tilt reconstructed from the particle mean") {
    const auto base = mix2();
    const auto g = TimeGrid::uniform(0.0, 1.0, 100);
    const auto noise = wiener_increments(g, 2, 8, 0);
    const auto clouds = particle_sl_run(base, 4000, g, noise);
    REQUIRE(clouds.size() == 101);
    Vector c = Vector::Zero(2);
    for (std::size_t k = 0; k < g.steps(); ++k) c += clouds[k].mean() * (g[k + 1] - g[k]) + noise.increment(k);
    const auto& last = clouds.back();
    Vector lw = last.points * c - 0.5 * last.t * last.points.rowwise().squaredNorm();
    lw.array() -= lw.maxCoeff();
    const Vector w = lw.array().exp() / lw.array().exp().sum();
    CHECK((last.weights() - w).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((last.mean() - tilted_mean(base, c, last.t)).norm() < 0.1);
    CHECK(last.ess() > 40.0);
    CHECK(last.probability([](const Vector&) { return true; }) == doctest::Approx(1.0));
}

TEST_CASE("total particle mass is a martingale") {
    const TargetMeasure base(GaussianMeasure(Vector::Zero(1), Matrix::Identity(1, 1)));
    const auto g = TimeGrid::uniform(0.0, 0.5, 25);
    std::vector<double> mass;
    for (std::uint64_t s = 0; s < 1000; ++s)
        mass.push_back(std::exp(particle_sl_run(base, 20, g, wiener_increments(g, 1, 4, s)).back().log_mass));
    const auto sm = summarize(mass);
    CHECK(std::abs(sm.mean - 1.0) <= 4 * sm.mean_std_error);
}

TEST_CASE("particle weight collapse is reported") {
    const auto base = mix2();
    const auto g = TimeGrid::uniform(0.0, 200.0, 200);
    ParticleOptions o;
    o.min_ess_fraction = 0.5;
    CHECK_THROWS_AS(particle_sl_run(base, 20, g, wiener_increments(g, 2, 1, 1), o), EstimatorError);
    CHECK_THROWS_AS(particle_sl_run(base, 1, g, wiener_increments(g, 2, 1, 1)), DomainError);
    o.min_ess_fraction = 0.0;
    o.record_every = 50;
    CHECK(particle_sl_run(base, 20, g, wiener_increments(g, 2, 1, 1), o).size() == 5);
}

TEST_CASE("anisotropic run with C = I reproduces the isotropic run bitwise") {
    for (const auto& base : {gauss2(), mix2()}) {
        const auto g = TimeGrid::uniform(0.0, 1.0, 50);
        const auto noise = wiener_increments(g, 2, 17, 0);
        const auto iso = tilt_sde_run(base, g, noise);
        const auto an = anisotropic_sl_run(base, g, noise, [](double) { return Matrix(Matrix::Identity(2, 2)); });
        REQUIRE(iso.size() == an.size());
        for (std::size_t k = 0; k < iso.size(); ++k) {
            CHECK((iso[k].c - an[k].c).cwiseAbs().maxCoeff() == 0.0);
            CHECK((iso[k].m - an[k].m).cwiseAbs().maxCoeff() == 0.0);
        }
        CHECK((an.back().reg.raw_matrix() - iso.back().t * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("anisotropic run with a degenerate control") {
    const auto base = gauss2();
    const auto g = TimeGrid::uniform(0.0, 1.0, 40);
    Matrix C = Matrix::Zero(2, 2);
    C(0, 0) = 1.0;
    const auto run = anisotropic_sl_run(base, g, wiener_increments(g, 2, 2, 2), [&](double) { return C; });
    const auto& s = run.back();
    CHECK(s.c[1] == 0.0);
    CHECK(s.reg.raw_matrix()(1, 1) == 0.0);
    CHECK(s.reg.raw_matrix()(0, 0) == doctest::Approx(1.0));
    // only the first coordinate is observed; the second follows by regression
    const auto& gm = *base.gaussian();
    const double m0 = s.m[0];
    CHECK(s.m[1] == doctest::Approx(gm.mean()[1] + gm.cov()(1, 0) / gm.cov()(0, 0) * (m0 - gm.mean()[0])));
    Stream r(1, 0);
    CHECK_THROWS_AS(anisotropic_step(base, run[0], Matrix::Identity(3, 3), 0.1, Vector::Zero(3), r), DimensionError);
}

TEST_CASE("tilt sde on a generic potential uses importance sampling") {
    const TargetMeasure base(builtin_potential("quartic", 1));
    const auto g = TimeGrid::uniform(0.0, 0.5, 10);
    SLOptions o;
    o.budget = 500;
    const auto a = tilt_sde_run(base, g, wiener_increments(g, 1, 6, 0), o);
    const auto b = tilt_sde_run(base, g, wiener_increments(g, 1, 6, 0), o);
    CHECK(a.back().m[0] == b.back().m[0]);
    CHECK(a.back().m_std_error > 0.0);
    CHECK_THROWS_AS(tilt_sde_run(base, g, wiener_increments(g, 2, 6, 0), o), DimensionError);
}

TEST_CASE("sl csv") {
    std::ostringstream os;
    const auto g = TimeGrid::uniform(0.0, 1.0, 1);
    write_sl_csv(os, 3, tilt_sde_run(gauss2(), g, wiener_increments(g, 2, 1, 3)), true);
    const std::string text = os.str();
    CHECK(text.rfind("stream_id,t,c_1,c_2,m_1,m_2\n3,0,0,0,", 0) == 0);
    CHECK(std::stod(text.substr(text.find("3,0,0,0,") + 8)) == doctest::Approx(0.4).epsilon(1e-14));
}
