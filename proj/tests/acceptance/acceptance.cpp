// One line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "../unit/oracles.hpp"
#include "sloc/bridge.hpp"
#include "sloc/diagnostics.hpp"
#include "sloc/diffusion.hpp"
#include "sloc/localize.hpp"
#include "sloc/polchinski.hpp"
#include "sloc/rgd.hpp"

using namespace sloc;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void need(bool ok, const std::string& what) {
        if (!ok) pass = false;
        detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [FAIL]");
    }
};

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

Vector v1(double x) { return Vector::Constant(1, x); }

TargetMeasure std_normal() { return TargetMeasure(GaussianMeasure(v1(0.0), Matrix::Identity(1, 1))); }

TargetMeasure mixture1() {
    return TargetMeasure(GaussianMixture({{0.3, GaussianMeasure(v1(-1.5), Matrix::Constant(1, 1, 0.4))},
                                          {0.7, GaussianMeasure(v1(1.0), Matrix::Constant(1, 1, 0.6))}}));
}

// KS and mean/variance z between two samples
void compare_laws(Outcome& o, const std::string& tag, const std::vector<double>& a, const std::vector<double>& b) {
    const auto sa = summarize(a), sb = summarize(b);
    const double zm = two_sample_mean_z(sa, sb), zv = two_sample_var_z(sa, sb);
    const double p = ks_two_sample(a, b).p_value;
    o.need(std::abs(zm) <= 4.0, tag + " mean z=" + num(zm));
    o.need(std::abs(zv) <= 4.0, tag + " var z=" + num(zv));
    o.need(p > 0.01, tag + " KS p=" + num(p));
}

std::vector<double> channel_c(const TargetMeasure& base, double t, std::size_t n, std::uint64_t seed) {
    std::vector<double> out(n);
    const TimeGrid g({0.0, t});
    for (std::size_t i = 0; i < n; ++i) out[i] = channel_path(base, g, seed, i).c.states(1, 0);
    return out;
}

Outcome criterion1() {
    Outcome o;
    const auto base = std_normal();
    const std::size_t n = 10000;
    const auto g = TimeGrid::uniform(0.0, 1.0, 1000);
    std::vector<double> sde(n);
    for (std::size_t i = 0; i < n; ++i) sde[i] = tilt_sde_run(base, g, wiener_increments(g, 1, 101, i)).back().c[0];
    const auto ch = channel_c(base, 1.0, n, 102);
    compare_laws(o, "c1", sde, ch);
    // c₁ = x + B₁ with x, B₁ independent N(0,1)
    const auto s = summarize(sde);
    o.need(std::abs(s.var - 2.0) <= 4 * s.var_std_error, "Var c1=" + num(s.var) + " vs 2");
    return o;
}

Outcome criterion2() {
    Outcome o;
    const auto base = mixture1();
    {
        const std::size_t n = 1000;
        const auto g = TimeGrid::uniform(0.0, 1.0, 1000);
        const auto noise = wiener_increments(g, 1, 201, 0);
        const auto clouds = particle_sl_run(base, n, g, noise);
        // tilt implied by the particle system: dc = m̂ dt + dW
        double ci = 0.0;
        double worst = 0.0;
        for (std::size_t k = 0; k < g.steps(); ++k) {
            ci += clouds[k].mean()[0] * (g[k + 1] - g[k]) + noise.increment(k)[0];
            if ((k + 1) % 250 == 0) {
                const double m = tilted_mean(base, v1(ci), g[k + 1])[0];
                worst = std::max(worst, std::abs(clouds[k + 1].mean()[0] - m));
            }
        }
        o.need(worst <= 5.0 / std::sqrt(static_cast<double>(n)),
               "max |particle mean - m_t|=" + num(worst) + " <= " + num(5.0 / std::sqrt(1000.0)));
    }
    {
        // E π_t([0.5, 2]) = π([0.5, 2]) over independent runs
        auto in_box = [](const Vector& x) { return x[0] >= 0.5 && x[0] <= 2.0; };
        const double p0 = oracle::integrate([&](double x) { return std::exp(base.log_density(v1(x))); }, 0.5, 2.0);
        const auto g = TimeGrid::uniform(0.0, 1.0, 100);
        ParticleOptions po;
        po.record_every = 100;
        std::vector<double> p(1000);
        for (std::size_t r = 0; r < p.size(); ++r)
            p[r] = particle_sl_run(base, 1000, g, wiener_increments(g, 1, 202, r), po).back().probability(in_box);
        const auto s = summarize(p);
        o.need(std::abs(s.mean - p0) <= 4 * s.mean_std_error,
               "box prob " + num(s.mean) + " vs " + num(p0) + " (z=" + num((s.mean - p0) / s.mean_std_error) + ")");
    }
    return o;
}

Outcome criterion3() {
    Outcome o;
    const std::size_t n = 10000;
    const auto ug = TimeGrid::geometric(1e-3, 1.0, 1500).with_points({0.5});
    const std::size_t i_half = ug.index_of(0.5), i_one = ug.size() - 1;
    for (const auto& [name, base] : {std::pair{std::string("gauss"), std_normal()}, std::pair{std::string("mix"), mixture1()}}) {
        std::vector<double> c_half(n), c_one(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto run = backward_sde_run(base, ug, wiener_increments(ug, 1, 301, i), {1e-3, 0});
            c_half[i] = rescale_to_tilt(run[i_half]).c[0];
            c_one[i] = rescale_to_tilt(run[i_one]).c[0];
        }
        if (name == "gauss") {
            for (const auto& [u, c] : {std::pair{0.5, &c_half}, std::pair{1.0, &c_one}}) {
                const auto s = summarize(*c);
                o.need(std::abs(s.var - (u * u + u)) <= 4 * s.var_std_error,
                       "Var c_" + num(u) + "=" + num(s.var) + " vs " + num(u * u + u));
            }
        }
        const auto g = TimeGrid::uniform(0.0, 1.0, 1000);
        std::vector<double> sde(n);
        for (std::size_t i = 0; i < n; ++i) sde[i] = tilt_sde_run(base, g, wiener_increments(g, 1, 302, i)).back().c[0];
        const double p = ks_two_sample(c_one, sde).p_value;
        o.need(p > 0.01, name + " KS backward vs tilt-SDE p=" + num(p));
    }
    {
        const auto base = mixture1();
        Stream r(303, 0);
        double worst = 0.0;
        for (int k = 0; k < 50; ++k) {
            const auto sp = ou_marginal_params(0.05 + 2.0 * r.uniform());
            const double y = -3.0 + 6.0 * r.uniform();
            auto log_nu = [&](double yy) {
                return std::log(oracle::integrate(
                    [&](double x) { return std::exp(base.log_density(v1(x))) * oracle::normal_pdf(yy, sp.s * x, sp.sigma2); },
                    -30, 30));
            };
            const double h = 1e-4;
            const double fd = (log_nu(y + h) - log_nu(y - h)) / (2 * h);
            const double sc = tweedie_score(base, sp, v1(y))[0];
            worst = std::max(worst, std::abs(sc - fd) / std::max(1.0, std::abs(fd)));
        }
        o.need(worst <= 1e-3, "Tweedie FD residual=" + num(worst));
    }
    return o;
}

Outcome criterion4() {
    Outcome o;
    const std::size_t n = 10000;
    const auto tg = TimeGrid::uniform(0.0, 0.5, 1000);
    for (const auto& [name, base] : {std::pair{std::string("gauss"), std_normal()}, std::pair{std::string("mix"), mixture1()}}) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i)
            v[i] = polchinski_run(base, tg, wiener_increments(tg, 1, 401, i)).states(1000, 0) / 0.5;
        const auto ch = channel_c(base, 1.0, n, 402);
        const double p = ks_two_sample(v, ch).p_value;
        o.need(p > 0.01, name + " KS v/(1-tau) vs c1 p=" + num(p));
    }
    {
        // ∂_τ V = ½(|∇V|² − ΔV)
        const auto base = mixture1();
        Stream r(403, 0);
        double worst = 0.0;
        for (int k = 0; k < 20; ++k) {
            const double tau = 0.05 + 0.85 * r.uniform(), x = -3.0 + 6.0 * r.uniform();
            auto V = [&](double t, double y) { return renorm_potential(base, t, v1(y)).value; };
            const double ht = 1e-5, hx = 1e-4;
            const double dt = (V(tau + ht, x) - V(tau - ht, x)) / (2 * ht);
            const double gr = (V(tau, x + hx) - V(tau, x - hx)) / (2 * hx);
            const double lap = (V(tau, x + hx) - 2 * V(tau, x) + V(tau, x - hx)) / (hx * hx);
            const double rhs = 0.5 * (gr * gr - lap);
            worst = std::max(worst, std::abs(dt - rhs) / std::max(1.0, std::abs(rhs)));
        }
        o.need(worst <= 1e-3, "Polchinski residual=" + num(worst));
    }
    return o;
}

Outcome criterion5() {
    Outcome o;
    const auto tg = TimeGrid::uniform(0.0, 0.999, 999);
    const std::vector<std::tuple<std::string, double, double, double>> cases{
        {"N(2,1)", 2.0, 1.0, 2.0}, {"N(0,2)", 0.0, 2.0, 0.5 * (1.0 - std::log(2.0))}};
    for (const auto& [name, mu, var, kl] : cases) {
        // relative entropy to N(0,1) by quadrature, checked against the closed form
        const double q = oracle::integrate(
            [&](double x) {
                const double lp = -0.5 * (x - mu) * (x - mu) / var - 0.5 * std::log(var);
                return oracle::normal_pdf(x, mu, var) * (lp + 0.5 * x * x);
            },
            -40, 40);
        const TargetMeasure base(GaussianMeasure(v1(mu), Matrix::Constant(1, 1, var)));
        const auto e = girsanov_energy(FollmerDrift(base), tg, 10000, 501);
        const double rel = std::abs(e.energy - kl) / kl;
        o.need(rel <= 0.05 && std::abs(q - kl) <= 1e-10,
               name + " energy=" + num(e.energy) + " KL=" + num(kl) + " rel=" + num(rel));
    }
    return o;
}

DiscreteMeasure random_atoms(Eigen::Index n, Stream& r) {
    Matrix pts(n, 1);
    Vector w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        pts(i, 0) = 2.0 * r.normal();
        w[i] = 0.1 + r.uniform();
    }
    return {pts, w / w.sum()};
}

double kl_to(const Matrix& g, const Matrix& ref) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = 0; j < g.cols(); ++j)
            if (g(i, j) > 0) s += g(i, j) * std::log(g(i, j) / ref(i, j));
    return s;
}

Outcome criterion6() {
    Outcome o;
    Stream r(601, 0);
    double spread = 0.0, resid = 0.0;
    for (Eigen::Index n = 2; n <= 10; n += 2) {
        const auto mu = random_atoms(n, r), pi = random_atoms(12 - n, r);
        const Matrix ref = reference_kernel(mu, pi);
        double lo = INFINITY, hi = -INFINITY;
        for (int k = 0; k < 20; ++k) {
            // a random feasible coupling: project a random positive kernel onto Γ(μ, π)
            Matrix lk(mu.size(), pi.size());
            for (Eigen::Index i = 0; i < lk.rows(); ++i)
                for (Eigen::Index j = 0; j < lk.cols(); ++j) lk(i, j) = 3.0 * r.normal();
            const auto c = sinkhorn_log(mu.weights, pi.weights, lk, 1e-14, 100000).coupling;
            const auto op = objective_pair(c, mu, pi, ref);
            lo = std::min(lo, op.eot - op.ssb);
            hi = std::max(hi, op.eot - op.ssb);
        }
        spread = std::max(spread, hi - lo);
        const auto s = sinkhorn(mu, pi, ref, 1e-10, 100000);
        resid = std::max(resid, schrodinger_residual(s, mu, pi, ref));
    }
    o.need(spread <= 1e-10, "objective shift spread=" + num(spread));
    o.need(resid <= 1e-8, "Schrodinger residual=" + num(resid));

    // 2×2: γ₁₁ = p determines the coupling
    const auto mu = random_atoms(2, r), pi = random_atoms(2, r);
    const Matrix ref = reference_kernel(mu, pi);
    const double plo = std::max(0.0, mu.weights[0] + pi.weights[0] - 1.0), phi = std::min(mu.weights[0], pi.weights[0]);
    auto coupling = [&](double p) {
        Matrix g(2, 2);
        g << p, mu.weights[0] - p, pi.weights[0] - p, 1.0 - mu.weights[0] - pi.weights[0] + p;
        return g;
    };
    const int grid = 1000000;
    double best = INFINITY, best_p = 0.0;
    for (int k = 1; k < grid; ++k) {
        const double p = plo + (phi - plo) * k / grid;
        const double v = kl_to(coupling(p), ref);
        if (v < best) {
            best = v;
            best_p = p;
        }
    }
    const auto s = sinkhorn(mu, pi, ref, 1e-14, 100000);
    const double err = std::abs(s.coupling.gamma(0, 0) - best_p);
    o.need(err <= 1e-6, "2x2 |gamma11 - grid optimum|=" + num(err));
    return o;
}

Outcome criterion7() {
    Outcome o;
    const GaussianMeasure target(v1(0.0), Matrix::Identity(1, 1));
    double worst = 0.0;
    for (double a : {-3.0, 0.5, 2.0}) {
        const auto law = chain_law_propagate(GaussianMeasure(v1(a), Matrix::Identity(1, 1)), target, 1.0, 5);
        // mean halves, variance stays 1: KL = a²/2 · 4^{−k}
        for (std::size_t k = 0; k < law.ratios.size(); ++k) {
            worst = std::max(worst, std::abs(law.ratios[k] - 0.25));
            worst = std::max(worst, std::abs(law.kl[k + 1] - 0.5 * a * a * std::pow(0.25, k + 1)));
        }
    }
    o.need(worst <= 1e-12, "exact ratio |r - 1/4|=" + num(worst));

    double mis = 0.0;
    for (double v0 : {0.1, 0.5, 3.0, 10.0}) {
        const auto law = chain_law_propagate(GaussianMeasure(v1(1.0), Matrix::Constant(1, 1, v0)), target, 1.0, 10);
        for (double r : law.ratios) mis = std::max(mis, r);
    }
    o.need(mis <= 0.25 + 1e-12, "mismatched-covariance max ratio=" + num(mis));

    const GaussianMeasure init(v1(1.5), Matrix::Constant(1, 1, 0.5));
    const auto check = heat_flow_contraction_mc(TargetMeasure(builtin_potential("gaussian", 1)), init, 1.0, 10000, 701);
    const auto exact = chain_law_propagate(init, target, 1.0, 1).ratios[0];
    o.need(std::abs(check.ratio - exact) <= 4 * check.std_error,
           "estimator vs exact " + num(check.ratio) + " vs " + num(exact));
    const auto q = heat_flow_contraction_mc(TargetMeasure(builtin_potential("quartic", 1)), init, 1.0, 10000, 702);
    o.need(q.ratio <= 0.25 + 4 * q.std_error, "quartic ratio=" + num(q.ratio) + " +- " + num(q.std_error));
    o.need(lsi_lower_bound(1.0, 1.0) == 0.5, "lsi_lower_bound(1,1)=" + num(lsi_lower_bound(1.0, 1.0)));
    return o;
}

Outcome criterion8() {
    Outcome o;
    const std::size_t n = 10000;
    for (const auto& [name, target] : {std::pair{std::string("gauss"), std_normal()}, std::pair{std::string("mix"), mixture1()}}) {
        const RgdConfig cfg{0.7, target};
        Stream ra(801, 0), rb(802, 0);
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rgd_step(v1(2.0 * ra.normal()), cfg, ra)[0];
            b[i] = rgd_step_channel(v1(2.0 * rb.normal()), cfg, rb)[0];
        }
        const double p = ks_two_sample(a, b).p_value;
        o.need(p > 0.01, name + " KS p=" + num(p));
    }
    return o;
}

Outcome criterion9() {
    Outcome o;
    Stream r(901, 0);
    Matrix a(3, 3);
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) a(i, j) = r.normal();
    const Matrix s = a * a.transpose() + 0.5 * Matrix::Identity(3, 3);
    const Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    const double lmax = es.eigenvalues()[2];
    const Vector top = es.eigenvectors().col(2);
    Matrix probes(100, 3);
    for (Eigen::Index i = 0; i < 100; ++i) probes.row(i) = (4.0 * r.normal()) * top.transpose();
    const TargetMeasure g(GaussianMeasure(Vector::Zero(3), s));
    const auto rep = entropic_stability_probe(g, probes, lmax);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < 100; ++i) {
        const Vector y = probes.row(i).transpose();
        const double lhs = 0.5 * (s * y).squaredNorm(), rhs = lmax * 0.5 * y.dot(s * y);
        const auto k = static_cast<std::size_t>(i);
        const double scale = std::max(1.0, rhs);
        worst = std::max({worst, std::abs(rep.lhs[k] - rep.rhs[k]) / scale, std::abs(rep.lhs[k] - lhs) / scale,
                          std::abs(rep.rhs[k] - rhs) / scale});
    }
    o.need(worst <= 1e-10 && rep.all_pass(), "sharp equality residual=" + num(worst));

    bool bitwise = true;
    Matrix s2(2, 2);
    s2 << 1.0, 0.3, 0.3, 0.7;
    const TargetMeasure bases[] = {
        TargetMeasure(GaussianMeasure(Vector::Zero(2), s2)),
        TargetMeasure(GaussianMixture({{0.4, GaussianMeasure(Vector::Constant(2, -1.0), s2)},
                                       {0.6, GaussianMeasure(Vector::Constant(2, 1.0), 0.5 * s2)}}))};
    for (const auto& base : bases) {
        const auto grid = TimeGrid::uniform(0.0, 1.0, 1000);
        for (std::uint64_t p = 0; p < 5; ++p) {
            const auto noise = wiener_increments(grid, 2, 902, p);
            const auto iso = tilt_sde_run(base, grid, noise);
            const auto an = anisotropic_sl_run(base, grid, noise, [](double) { return Matrix(Matrix::Identity(2, 2)); });
            for (std::size_t k = 0; k < iso.size(); ++k)
                bitwise = bitwise && (iso[k].c.array() == an[k].c.array()).all() && (iso[k].m.array() == an[k].m.array()).all();
        }
    }
    o.need(bitwise, std::string("C=I bitwise ") + (bitwise ? "equal" : "different"));
    return o;
}

Outcome criterion10() {
    Outcome o;
    Stream r(1001, 0);
    double g1 = 0.0, sf = 0.0, vs = 0.0;
    for (int k = 0; k < 100; ++k) {
        const double alpha = std::exp(-4.0 + 8.0 * r.uniform());
        const auto s = lsi_schedule(alpha);
        g1 = std::max(g1, std::abs(s.gamma(1.0) - alpha) / alpha);
        if (k < 20) {
            for (double tau : {0.02, 0.3, 0.7, 0.95}) {
                const double ig = oracle::integrate([&](double x) { return s.gamma(x); }, tau, 1.0);
                sf = std::max(sf, std::abs(stability_factor(alpha, tau) - (1.0 - std::exp(-ig))));
            }
            // π = N(0, I/α): Var of ⟨θ,x⟩ under the fluctuation measure over its variance under π
            const TargetMeasure g(GaussianMeasure(Vector::Zero(2), Matrix::Identity(2, 2) / alpha));
            const Vector theta = (Vector(2) << 0.8, -0.4).finished();
            for (double tau : {0.1, 0.5, 0.9}) {
                const Matrix cv = posterior_moments(fluctuation_measure(g, tau, Vector::Constant(2, 0.7))).cov;
                const double ratio = theta.dot(cv * theta) / (theta.squaredNorm() / alpha);
                const double expect = alpha * (1.0 - tau) / (alpha * (1.0 - tau) + tau);
                vs = std::max({vs, std::abs(ratio - expect), std::abs(stability_factor(alpha, tau) - expect)});
            }
        }
    }
    o.need(g1 <= 1e-12, "gamma_1 = alpha rel err=" + num(g1));
    o.need(sf <= 1e-6, "stability factor vs quadrature=" + num(sf));
    o.need(vs <= 1e-10, "variance stability=" + num(vs));
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 tilt SDE vs channel", criterion1},
        {"2 particles and martingale", criterion2},
        {"3 backward diffusion", criterion3},
        {"4 Polchinski flow", criterion4},
        {"5 Girsanov energy", criterion5},
        {"6 EOT vs SSB", criterion6},
        {"7 RGD contraction", criterion7},
        {"8 RGD kernel identity", criterion8},
        {"9 entropic stability", criterion9},
        {"10 LSI schedule", criterion10},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.need(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %s (%.1fs): %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), secs, o.detail.str().c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed ? 1 : 0;
}
