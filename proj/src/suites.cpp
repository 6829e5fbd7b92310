#include "sloc/suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <json.hpp>

#include "sloc/bridge.hpp"
#include "sloc/diagnostics.hpp"
#include "sloc/diffusion.hpp"
#include "sloc/error.hpp"
#include "sloc/localize.hpp"
#include "sloc/polchinski.hpp"
#include "sloc/rgd.hpp"
#include "sloc/sde.hpp"

namespace sloc {

using nlohmann::json;

bool Report::pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

void Report::run(const std::string& name, const std::function<Check()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Check c;
    try {
        c = fn();
    } catch (const std::exception& e) {
        c = Check{};
        c.observed = std::nan("");
        c.pass = false;
        c.detail = std::string("error: ") + e.what();
    }
    c.name = name;
    c.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    checks.push_back(std::move(c));
}

void Report::merge(const Report& other) {
    for (const auto& c : other.checks) {
        Check k = c;
        k.name = other.suite + "/" + c.name;
        checks.push_back(std::move(k));
    }
}

std::string report_to_json(const Report& r) {
    json j;
    j["suite"] = r.suite;
    j["pass"] = r.pass();
    j["checks"] = json::array();
    for (const auto& c : r.checks) {
        j["checks"].push_back({{"name", c.name},
                               {"observed", std::isfinite(c.observed) ? json(c.observed) : json(nullptr)},
                               {"tolerance", c.tolerance},
                               {"relation", c.relation},
                               {"pass", c.pass},
                               {"runtime_s", c.runtime_s},
                               {"detail", c.detail}});
    }
    return j.dump(2);
}

std::string report_to_csv(const Report& r) {
    std::ostringstream os;
    os.precision(17);
    os << "name,observed,relation,tolerance,pass\n";
    for (const auto& c : r.checks)
        os << c.name << ',' << c.observed << ',' << c.relation << ',' << c.tolerance << ',' << (c.pass ? 1 : 0)
           << '\n';
    return os.str();
}

Report report_from_json(const std::string& text) {
    const json j = json::parse(text);
    Report r;
    r.suite = j.value("suite", "");
    for (const auto& c : j.at("checks")) {
        Check k;
        k.name = c.at("name");
        k.observed = c.at("observed").is_null() ? std::nan("") : c.at("observed").get<double>();
        k.tolerance = c.at("tolerance");
        k.relation = c.value("relation", "<=");
        k.pass = c.at("pass");
        k.runtime_s = c.value("runtime_s", 0.0);
        k.detail = c.value("detail", "");
        r.checks.push_back(std::move(k));
    }
    return r;
}

namespace {

Check le(double observed, double tol, std::string detail = {}) {
    Check c;
    c.observed = observed;
    c.tolerance = tol;
    c.relation = "<=";
    c.pass = observed <= tol;
    c.detail = std::move(detail);
    return c;
}

Check ge(double observed, double tol, std::string detail = {}) {
    Check c = le(observed, tol, std::move(detail));
    c.relation = ">=";
    c.pass = observed >= tol;
    return c;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

const TargetMeasure& tractable_target(const ExperimentConfig& cfg) {
    if (!cfg.target) throw DomainError("config has no target");
    if (!cfg.target->tractable()) throw DomainError("this suite needs a Gaussian or mixture target");
    return *cfg.target;
}

std::vector<double> column(const Matrix& m, Eigen::Index j) {
    return std::vector<double>(m.col(j).data(), m.col(j).data() + m.rows());
}

Vector base_mean(const TargetMeasure& t) {
    return posterior_moments(tilt(t, Vector::Zero(t.dim()), Regularizer(0.0))).mean;
}

Matrix base_cov(const TargetMeasure& t) {
    return posterior_moments(tilt(t, Vector::Zero(t.dim()), Regularizer(0.0))).cov;
}

std::size_t steps_for(double span, double dt) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(span / dt)));
}

// Worst per-coordinate comparison of two ensembles: KS p-value (minimum) and
// largest |z| over mean and variance.
struct LawComparison {
    double min_p = 1.0;
    double max_z = 0.0;
};

LawComparison compare_laws(const Matrix& a, const Matrix& b) {
    LawComparison out;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const auto ca = column(a, j), cb = column(b, j);
        out.min_p = std::min(out.min_p, ks_two_sample(ca, cb).p_value);
        const auto sa = summarize(ca), sb = summarize(cb);
        out.max_z = std::max({out.max_z, std::abs(two_sample_mean_z(sa, sb)), std::abs(two_sample_var_z(sa, sb))});
    }
    return out;
}

// Worst |z| of the ensemble's per-coordinate mean and variance against a known law.
double law_z(const Matrix& s, const Vector& mean, const Matrix& cov) {
    double z = 0.0;
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
        const auto sm = summarize(column(s, j));
        z = std::max({z, std::abs(sm.mean - mean[j]) / sm.mean_std_error,
                      std::abs(sm.var - cov(j, j)) / sm.var_std_error});
    }
    return z;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

Matrix sl_terminal(const TargetMeasure& base, const TimeGrid& grid, std::size_t paths, std::uint64_t seed,
                   std::size_t at, unsigned workers, std::size_t budget) {
    const Eigen::Index d = base.dim();
    Matrix out(static_cast<Eigen::Index>(paths), d);
    SLOptions o;
    o.budget = budget;
    parallel_for(paths, workers, [&](std::size_t p) {
        const auto states = tilt_sde_run(base, grid, wiener_increments(grid, d, seed, p), o);
        out.row(static_cast<Eigen::Index>(p)) = states[at].c.transpose();
    });
    return out;
}

// Φ(z)
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// π₀(x₁ ≤ a) for a tractable base.
double half_space_probability(const TargetMeasure& base, double a) {
    if (const auto* g = base.gaussian()) return normal_cdf((a - g->mean()[0]) / std::sqrt(g->cov()(0, 0)));
    double p = 0.0;
    for (const auto& c : base.mixture()->components())
        p += c.weight * normal_cdf((a - c.gaussian.mean()[0]) / std::sqrt(c.gaussian.cov()(0, 0)));
    return p;
}

double log_marginal(const TargetMeasure& base, const NoisyChannelSpec& spec, const Vector& y) {
    const double d = static_cast<double>(y.size());
    const TiltedMeasure m = tilt(base, spec.s * y / spec.sigma2, Regularizer(spec.s * spec.s / spec.sigma2));
    return log_partition(m) - y.squaredNorm() / (2.0 * spec.sigma2) -
           0.5 * d * std::log(2.0 * std::numbers::pi * spec.sigma2);
}

double integrate(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14);
}

}  // namespace

Report run_equiv(const ExperimentConfig& cfg) {
    const TargetMeasure& base = tractable_target(cfg);
    const Eigen::Index d = base.dim();
    const double horizon = std::max(cfg.horizon, 1.0);
    const TimeGrid grid = TimeGrid::uniform(0.0, horizon, steps_for(horizon, cfg.dt)).with_points({0.5, 1.0});
    const std::size_t n = cfg.paths;
    const double bonf = cfg.level / static_cast<double>(d);
    const std::string& which = cfg.perspective;
    auto want = [&](const char* p) { return which == "all" || which == p; };

    Report rep;
    rep.suite = "equiv";
    Matrix sl_at1;
    auto need_sl = [&]() -> const Matrix& {
        if (sl_at1.size() == 0)
            sl_at1 = sl_terminal(base, grid, n, derive_seed(cfg.seed, 1), grid.index_of(1.0), cfg.workers, cfg.budget);
        return sl_at1;
    };

    if (want("1-3")) {
        rep.run("tilt_sde_vs_channel_ks", [&] {
            const auto& a = need_sl();
            Matrix b(static_cast<Eigen::Index>(n), d);
            const auto seed = derive_seed(cfg.seed, 2);
            const std::size_t k1 = grid.index_of(1.0);
            parallel_for(n, cfg.workers, [&](std::size_t p) {
                b.row(static_cast<Eigen::Index>(p)) = channel_path(base, grid, seed, p).c.states.row(static_cast<Eigen::Index>(k1));
            });
            const auto cmp = compare_laws(a, b);
            Check c = ge(cmp.min_p, bonf, "moment max|z|=" + fmt(cmp.max_z));
            c.pass = c.pass && cmp.max_z <= 4.0;
            return c;
        });
        rep.run("tilt_sde_c1_law", [&] {
            // c₁ = x + B₁ with x ∼ π₀
            const Matrix cov = base_cov(base) + Matrix::Identity(d, d);
            return le(law_z(need_sl(), base_mean(base), cov), 4.0);
        });
    }

    if (want("1-2")) {
        const TimeGrid half = TimeGrid::uniform(0.0, 0.5, steps_for(0.5, cfg.dt));
        ParticleOptions po;
        po.record_every = half.steps();
        rep.run("particle_mean_vs_closed_form", [&] {
            double worst = 0.0;
            const auto seed = derive_seed(cfg.seed, 3);
            for (std::size_t r = 0; r < 10; ++r) {
                const SamplePath w = wiener_increments(half, d, seed, r);
                const auto clouds = particle_sl_run(base, cfg.particles, half, w, po);
                const auto states = tilt_sde_run(base, half, w);
                worst = std::max(worst, (clouds.back().mean() - states.back().m).cwiseAbs().maxCoeff());
            }
            return le(worst, 5.0 / std::sqrt(static_cast<double>(cfg.particles)));
        });
        const std::size_t runs = std::min<std::size_t>(1000, std::max<std::size_t>(n / 10, 100));
        std::vector<double> box(runs), mass(runs);
        const double a = base_mean(base)[0];
        bool ran = false;
        auto martingale = [&] {
            if (ran) return;
            const auto seed = derive_seed(cfg.seed, 4);
            parallel_for(runs, cfg.workers, [&](std::size_t r) {
                const auto clouds = particle_sl_run(base, cfg.particles, half, wiener_increments(half, d, seed, r), po);
                box[r] = clouds.back().probability([&](const Vector& x) { return x[0] <= a; });
                mass[r] = std::exp(clouds.back().log_mass);
            });
            ran = true;
        };
        rep.run("martingale_box_probability", [&] {
            martingale();
            const auto s = summarize(box);
            const double target = half_space_probability(base, a);
            return le(std::abs(s.mean - target) / s.mean_std_error, 4.0,
                      "mean " + fmt(s.mean) + " vs " + fmt(target));
        });
        rep.run("martingale_mass", [&] {
            martingale();
            const auto s = summarize(mass);
            return le(std::abs(s.mean - 1.0) / s.mean_std_error, 4.0, "E[M_T] = " + fmt(s.mean));
        });
    }

    if (want("1-4")) {
        const TimeGrid ug = TimeGrid::geometric(cfg.eps_clip, 1.0, 2 * steps_for(1.0, cfg.dt)).with_points({0.5});
        BackwardOptions bo;
        bo.eps_clip = cfg.eps_clip;
        bo.budget = cfg.budget;
        const auto seed = derive_seed(cfg.seed, 5);
        Matrix c_half(static_cast<Eigen::Index>(n), d), c_one(static_cast<Eigen::Index>(n), d);
        bool ran = false;
        auto backward = [&] {
            if (ran) return;
            const std::size_t ih = ug.index_of(0.5), i1 = ug.size() - 1;
            parallel_for(n, cfg.workers, [&](std::size_t p) {
                const auto st = backward_sde_run(base, ug, wiener_increments(ug, d, seed, p), bo);
                c_half.row(static_cast<Eigen::Index>(p)) = rescale_to_tilt(st[ih]).c.transpose();
                c_one.row(static_cast<Eigen::Index>(p)) = rescale_to_tilt(st[i1]).c.transpose();
            });
            ran = true;
        };
        for (double u : {0.5, 1.0}) {
            rep.run("backward_rescaled_law_u" + fmt(u), [&, u] {
                backward();
                // c_u = u·x + B_u has covariance u²Cov(x) + u·I
                const Matrix cov = u * u * base_cov(base) + u * Matrix::Identity(d, d);
                return le(law_z(u == 1.0 ? c_one : c_half, u * base_mean(base), cov), 4.0);
            });
        }
        rep.run("backward_vs_tilt_sde_ks_u1", [&] {
            backward();
            const auto cmp = compare_laws(c_one, need_sl());
            Check c = ge(cmp.min_p, bonf, "moment max|z|=" + fmt(cmp.max_z));
            c.pass = c.pass && cmp.max_z <= 4.0;
            return c;
        });
        rep.run("tweedie_finite_difference", [&] {
            Stream rng(derive_seed(cfg.seed, 6), 0, Lane::aux);
            double worst = 0.0;
            const Vector mu = base_mean(base);
            for (int k = 0; k < 50; ++k) {
                const NoisyChannelSpec spec{0.2 + 0.8 * rng.uniform(), 0.2 + 1.8 * rng.uniform()};
                const Vector y = spec.s * mu + 2.0 * rng.normal_vector(d);
                const Vector sc = tweedie_score(base, spec, y);
                Vector fd(d);
                const double h = 1e-5;
                for (Eigen::Index j = 0; j < d; ++j) {
                    Vector yp = y, ym = y;
                    yp[j] += h;
                    ym[j] -= h;
                    fd[j] = (log_marginal(base, spec, yp) - log_marginal(base, spec, ym)) / (2.0 * h);
                }
                worst = std::max(worst, (sc - fd).norm() / std::max(1.0, fd.norm()));
            }
            return le(worst, 1e-3);
        });
    }

    if (want("1-5")) {
        const TimeGrid tg = TimeGrid::uniform(0.0, 0.5, steps_for(1.0, cfg.dt));
        rep.run("polchinski_vs_tilt_sde_ks", [&] {
            Matrix v(static_cast<Eigen::Index>(n), d);
            const auto seed = derive_seed(cfg.seed, 7);
            PolchinskiOptions po;
            po.eps_clip = cfg.eps_clip;
            po.budget = cfg.budget;
            parallel_for(n, cfg.workers, [&](std::size_t p) {
                const SamplePath path = polchinski_run(base, tg, wiener_increments(tg, d, seed, p), po);
                v.row(static_cast<Eigen::Index>(p)) = path.states.row(path.states.rows() - 1) / 0.5;
            });
            const auto cmp = compare_laws(v, need_sl());
            Check c = ge(cmp.min_p, bonf, "moment max|z|=" + fmt(cmp.max_z));
            c.pass = c.pass && cmp.max_z <= 4.0;
            return c;
        });
        rep.run("polchinski_equation_residual", [&] {
            Stream rng(derive_seed(cfg.seed, 8), 0, Lane::aux);
            double worst = 0.0;
            for (int k = 0; k < 20; ++k) {
                const double tau = 0.05 + 0.85 * rng.uniform();
                const Vector x = base_mean(base) + 1.5 * rng.normal_vector(d);
                const RenormValue r = renorm_potential(base, tau, x);
                const double ht = 1e-5, hx = 1e-4;
                const double dtau =
                    (renorm_potential(base, tau + ht, x).value - renorm_potential(base, tau - ht, x).value) / (2.0 * ht);
                double lap = 0.0;
                for (Eigen::Index j = 0; j < d; ++j) {
                    Vector xp = x, xm = x;
                    xp[j] += hx;
                    xm[j] -= hx;
                    lap += (renorm_potential(base, tau, xp).gradient[j] - renorm_potential(base, tau, xm).gradient[j]) /
                           (2.0 * hx);
                }
                const double grad2 = r.gradient.squaredNorm();
                const double res = dtau + 0.5 * lap - 0.5 * grad2;
                worst = std::max(worst, std::abs(res) / std::max(1.0, std::abs(dtau) + 0.5 * std::abs(lap) + 0.5 * grad2));
            }
            return le(worst, 1e-3);
        });
    }
    return rep;
}

Report run_rgd(const ExperimentConfig& cfg) {
    Report rep;
    rep.suite = "rgd";
    const double eta = cfg.eta;
    const TargetMeasure& target = tractable_target(cfg);
    const Eigen::Index d = target.dim();

    if (const auto* g = target.gaussian()) {
        const double alpha = 1.0 / g->eigenvalues().maxCoeff();
        const double bound = 1.0 / ((1.0 + alpha * eta) * (1.0 + alpha * eta));
        rep.run("chain_law_ratio_vs_bound", [&] {
            double worst = 0.0;
            for (double s2 : {0.5, 2.0, 10.0}) {
                const GaussianMeasure init(g->mean() + Vector::Ones(d), s2 * g->cov());
                const ChainLaw law = chain_law_propagate(init, *g, eta, cfg.rgd_steps);
                for (double r : law.ratios)
                    if (std::isfinite(r)) worst = std::max(worst, r);
            }
            return le(worst, bound + 1e-12, "bound " + fmt(bound));
        });
        rep.run("chain_law_stationary", [&] {
            const ChainLaw law = chain_law_propagate(*g, *g, eta, cfg.rgd_steps);
            double dev = 0.0;
            for (std::size_t k = 0; k < law.means.size(); ++k)
                dev = std::max({dev, (law.means[k] - g->mean()).cwiseAbs().maxCoeff(),
                                (law.covs[k] - g->cov()).cwiseAbs().maxCoeff()});
            return le(dev, 1e-12);
        });
        rep.run("stability_sharp_equality", [&] {
            const Vector top = g->eigenvectors().col(d - 1);
            const auto r = entropic_stability_probe(target, top.transpose() * 1.3, g->eigenvalues().maxCoeff());
            return le(std::abs(r.lhs[0] - r.rhs[0]) / std::max(1e-300, r.rhs[0]), 1e-10);
        });
    }
    rep.run("kernel_identity_ks", [&] {
        RgdConfig rc{eta, target, InnerSampler::exact, 10000, 1};
        const Vector x0 = base_mean(target) + Vector::Ones(d);
        const std::size_t n = cfg.paths;
        Matrix a(static_cast<Eigen::Index>(n), d), b(static_cast<Eigen::Index>(n), d);
        const auto sa = derive_seed(cfg.seed, 11), sb = derive_seed(cfg.seed, 12);
        parallel_for(n, cfg.workers, [&](std::size_t i) {
            Stream ra(sa, i, Lane::inner), rb(sb, i, Lane::inner);
            a.row(static_cast<Eigen::Index>(i)) = rgd_step(x0, rc, ra).transpose();
            b.row(static_cast<Eigen::Index>(i)) = rgd_step_channel(x0, rc, rb).transpose();
        });
        const auto cmp = compare_laws(a, b);
        return ge(cmp.min_p, cfg.level / static_cast<double>(d), "moment max|z|=" + fmt(cmp.max_z));
    });
    rep.run("entropic_stability_probes", [&] {
        Stream rng(derive_seed(cfg.seed, 13), 0, Lane::aux);
        Matrix probes(100, d);
        for (Eigen::Index i = 0; i < 100; ++i) probes.row(i) = (1.5 * rng.normal_vector(d)).transpose();
        double alpha_claim;
        if (const auto* g = target.gaussian()) {
            alpha_claim = g->eigenvalues().maxCoeff();
        } else {
            // sup of λ_max Cov(T_yπ) over probes and their segments from 0
            alpha_claim = 0.0;
            for (Eigen::Index i = 0; i < probes.rows(); ++i)
                for (int s = 0; s <= 20; ++s) {
                    const Vector y = probes.row(i).transpose() * (s / 20.0);
                    const Matrix cv = posterior_moments(tilt(target, y, Regularizer(0.0))).cov;
                    alpha_claim = std::max(alpha_claim,
                                           Eigen::SelfAdjointEigenSolver<Matrix>(cv).eigenvalues().maxCoeff());
                }
        }
        const auto r = entropic_stability_probe(target, probes, alpha_claim);
        double worst = -1e300;
        for (std::size_t i = 0; i < r.lhs.size(); ++i) worst = std::max(worst, r.lhs[i] - r.rhs[i]);
        Check c = le(worst, 0.0, "alpha " + fmt(alpha_claim));
        c.pass = r.all_pass();
        return c;
    });
    rep.run("lsi_lower_bound", [&] {
        const double b = lsi_lower_bound(cfg.alpha, eta);
        return le(std::abs(b - cfg.alpha * eta / (1.0 + cfg.alpha * eta)), 1e-15, "bound " + fmt(b));
    });
    for (double e : {0.5, 1.0}) {
        rep.run("quartic_contraction_eta" + fmt(e), [&, e] {
            const TargetMeasure q(builtin_potential("quartic", 1));
            const GaussianMeasure init(Vector::Constant(1, 2.0), Matrix::Identity(1, 1));
            const auto est = heat_flow_contraction_mc(q, init, e, std::min<std::size_t>(cfg.paths, 10000),
                                                      derive_seed(cfg.seed, 14));
            const double bound = 1.0 / ((1.0 + e) * (1.0 + e));
            return le(est.ratio - 4.0 * est.std_error, bound,
                      "ratio " + fmt(est.ratio) + " +- " + fmt(est.std_error) + ", bound " + fmt(bound));
        });
    }
    return rep;
}

Report run_bridge(const ExperimentConfig& cfg) {
    Report rep;
    rep.suite = "bridge";
    Stream rng(derive_seed(cfg.seed, 21), 0, Lane::aux);
    auto random_measure = [&](Eigen::Index n) {
        Matrix pts(n, 1);
        Vector w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            pts(i, 0) = 2.0 * rng.normal();
            w[i] = 0.2 + rng.uniform();
        }
        return DiscreteMeasure(pts, w / w.sum());
    };
    const DiscreteMeasure mu = random_measure(5), pi = random_measure(7);
    const Matrix ref = reference_kernel(mu, pi);
    const SinkhornResult sol = sinkhorn(mu, pi, ref, 1e-10, 10000);

    rep.run("sinkhorn_converged", [&] { return le(sol.residual, 1e-10, std::to_string(sol.iterations) + " iterations"); });
    rep.run("sinkhorn_monotone", [&] {
        double worst = 0.0;
        for (std::size_t k = 1; k < sol.trace.size(); ++k) worst = std::max(worst, sol.trace[k] - sol.trace[k - 1]);
        return le(worst, 1e-15);
    });
    rep.run("schrodinger_residual", [&] { return le(schrodinger_residual(sol, mu, pi, ref), 1e-8); });
    rep.run("objective_shift_spread", [&] {
        double lo = 1e300, hi = -1e300;
        for (int k = 0; k < 20; ++k) {
            Matrix pert = ref;
            for (Eigen::Index i = 0; i < pert.rows(); ++i)
                for (Eigen::Index j = 0; j < pert.cols(); ++j) pert(i, j) *= std::exp(rng.normal());
            const auto s = sinkhorn(mu, pi, pert, 1e-15, 100000);
            const auto o = objective_pair(s.coupling, mu, pi, ref);
            lo = std::min(lo, o.eot - o.ssb);
            hi = std::max(hi, o.eot - o.ssb);
        }
        return le(hi - lo, 1e-10);
    });
    rep.run("two_point_brute_force", [&] {
        const DiscreteMeasure u2(Matrix((Matrix(2, 1) << 0.0, 1.0).finished()), Vector::Constant(2, 0.5));
        const Matrix r2 = reference_kernel(u2, u2);
        const auto s = sinkhorn(u2, u2, r2, 1e-14, 10000);
        const double opt = objective_pair(s.coupling, u2, u2, r2).ssb;
        double best = 1e300;
        const int grid = 1000000;
        for (int k = 0; k <= grid; ++k) {
            const double a = 0.5 * k / grid;
            Matrix g(2, 2);
            g << a, 0.5 - a, 0.5 - a, a;
            DiscreteCoupling c{g, u2.weights, u2.weights};
            best = std::min(best, objective_pair(c, u2, u2, r2).ssb);
        }
        return le(std::abs(opt - best), 1e-6);
    });
    rep.run("markov_factorization", [&] {
        Matrix k1(4, 3), k2(3, 5);
        for (Eigen::Index i = 0; i < k1.size(); ++i) k1.data()[i] = 0.1 + rng.uniform();
        for (Eigen::Index i = 0; i < k2.size(); ++i) k2.data()[i] = 0.1 + rng.uniform();
        const Vector m0 = Vector::Constant(4, 0.25);
        Vector p1(5);
        for (Eigen::Index j = 0; j < 5; ++j) p1[j] = 0.5 + rng.uniform();
        p1 /= p1.sum();
        return le(three_time_markov_defect(m0, k1, k2, p1, 1e-13, 100000), 1e-8);
    });
    if (cfg.target && cfg.target->tractable()) {
        const TargetMeasure& base = *cfg.target;
        const Eigen::Index d = base.dim();
        const TimeGrid tg = TimeGrid::uniform(0.0, 1.0 - cfg.eps_clip, steps_for(1.0 - cfg.eps_clip, cfg.dt));
        rep.run("follmer_terminal_law", [&] {
            const std::size_t n = cfg.paths;
            Matrix v(static_cast<Eigen::Index>(n), d);
            const auto seed = derive_seed(cfg.seed, 22);
            PolchinskiOptions po;
            po.eps_clip = cfg.eps_clip;
            parallel_for(n, cfg.workers, [&](std::size_t p) {
                v.row(static_cast<Eigen::Index>(p)) = follmer_sample(base, tg, wiener_increments(tg, d, seed, p), po);
            });
            // v_τ = τx + (1−τ)B_{τ/(1−τ)}
            const double tau = tg.back();
            const Matrix cov = tau * tau * base_cov(base) + tau * (1.0 - tau) * Matrix::Identity(d, d);
            return le(law_z(v, tau * base_mean(base), cov), 4.0);
        });
        if (const auto* g = base.gaussian()) {
            rep.run("girsanov_energy_vs_kl", [&] {
                const double kl = gaussian_kl(g->mean(), g->cov(), Vector::Zero(d), Matrix::Identity(d, d));
                const auto e = girsanov_energy(FollmerDrift(base), tg, cfg.paths, derive_seed(cfg.seed, 23), cfg.workers);
                const double err = kl > 0.0 ? std::abs(e.energy - kl) / kl : std::abs(e.energy);
                return le(err, kl > 0.0 ? 0.05 : 1e-12, "energy " + fmt(e.energy) + " vs KL " + fmt(kl));
            });
        }
    }
    return rep;
}

Report run_lsi(const ExperimentConfig& cfg, std::ostream& table) {
    Report rep;
    rep.suite = "lsi";
    const LsiSchedule s = lsi_schedule(cfg.alpha);
    std::vector<double> taus;
    for (int k = 0; k <= 10; ++k) taus.push_back(k / 10.0);
    write_schedule_csv(table, s, taus);
    rep.run("gamma_at_one", [&] { return le(std::abs(s.gamma(1.0) - cfg.alpha), 1e-12 * std::max(1.0, cfg.alpha)); });
    rep.run("Lambda_integral", [&] {
        double worst = 0.0;
        for (int k = 0; k < 10; ++k) {
            const double tau = k / 10.0;
            const double q = integrate([&](double x) { return s.lambda(x); }, tau, 1.0);
            worst = std::max(worst, std::abs(q - s.Lambda(tau)));
        }
        return le(worst, 1e-6);
    });
    rep.run("stability_factor_integral", [&] {
        double worst = 0.0;
        for (int k = 1; k <= 10; ++k) {
            const double tau = 0.05 + 0.09 * (k - 1);
            const double q = integrate([&](double x) { return s.gamma(x); }, tau, 1.0);
            worst = std::max(worst, std::abs(1.0 - std::exp(-q) - stability_factor(cfg.alpha, tau)));
        }
        return le(worst, 1e-6);
    });
    rep.run("variance_stability_gaussian", [&] {
        const TargetMeasure g(GaussianMeasure(Vector::Zero(2), Matrix::Identity(2, 2) / cfg.alpha));
        const Vector theta = (Vector(2) << 0.6, -1.1).finished();
        double worst = 0.0;
        for (double tau : {0.1, 0.25, 0.5, 0.75, 0.9}) {
            const double t = tau / (1.0 - tau);
            const Matrix cv = posterior_moments(fluctuation_measure(g, tau, (Vector(2) << 0.3, 2.0).finished())).cov;
            const double ratio = theta.dot(cv * theta) / (theta.squaredNorm() / cfg.alpha);
            worst = std::max(worst, std::abs(ratio - cfg.alpha / (cfg.alpha + t)));
        }
        return le(worst, 1e-10);
    });
    rep.run("lsi_lower_bound", [&] {
        const double b = lsi_lower_bound(cfg.alpha, cfg.eta);
        return le(std::abs(b - cfg.alpha / (cfg.alpha + 1.0 / cfg.eta)), 1e-15, "bound " + fmt(b));
    });
    return rep;
}

void run_simulate(const ExperimentConfig& cfg, std::ostream& csv) {
    if (!cfg.target) throw DomainError("config has no target");
    const TargetMeasure& base = *cfg.target;
    const Eigen::Index d = base.dim();
    const std::string p = cfg.perspective == "all" ? "sl" : cfg.perspective;
    const std::size_t n = cfg.export_paths;
    const TimeGrid grid = TimeGrid::uniform(0.0, cfg.horizon, steps_for(cfg.horizon, cfg.dt));
    SLOptions so;
    so.budget = cfg.budget;
    if (p == "sl" || p == "1-2" || p == "1-3" || p == "1-4" || p == "1-5") {
        for (std::size_t i = 0; i < n; ++i)
            write_sl_csv(csv, i, tilt_sde_run(base, grid, wiener_increments(grid, d, cfg.seed, i), so), i == 0);
    } else if (p == "channel") {
        std::vector<SamplePath> paths;
        for (std::size_t i = 0; i < n; ++i) paths.push_back(channel_path(base, grid, cfg.seed, i).c);
        write_paths_csv(csv, paths, "t");
    } else if (p == "particles") {
        ParticleOptions po;
        po.record_every = grid.steps();
        const auto clouds = particle_sl_run(base, cfg.particles, grid, wiener_increments(grid, d, cfg.seed, 0), po);
        const auto& c = clouds.back();
        csv << "particle";
        for (Eigen::Index j = 0; j < d; ++j) csv << ",x_" << (j + 1);
        csv << ",log_weight\n";
        csv.precision(17);
        for (Eigen::Index i = 0; i < c.points.rows(); ++i) {
            csv << i;
            for (Eigen::Index j = 0; j < d; ++j) csv << ',' << c.points(i, j);
            csv << ',' << c.log_weights[i] << '\n';
        }
    } else if (p == "backward") {
        const TimeGrid ug = TimeGrid::geometric(cfg.eps_clip, 100.0, 2000);
        BackwardOptions bo;
        bo.eps_clip = cfg.eps_clip;
        bo.budget = cfg.budget;
        std::vector<SamplePath> paths;
        for (std::size_t i = 0; i < n; ++i) {
            const auto st = backward_sde_run(base, ug, wiener_increments(ug, d, cfg.seed, i), bo);
            Matrix m(static_cast<Eigen::Index>(st.size()), d);
            for (std::size_t k = 0; k < st.size(); ++k) m.row(static_cast<Eigen::Index>(k)) = st[k].x.transpose();
            paths.push_back({ug, m, cfg.seed, i});
        }
        write_paths_csv(csv, paths, "u");
    } else if (p == "polchinski") {
        const TimeGrid tg = TimeGrid::uniform(0.0, 1.0 - cfg.eps_clip, steps_for(1.0 - cfg.eps_clip, cfg.dt));
        PolchinskiOptions po;
        po.eps_clip = cfg.eps_clip;
        po.budget = cfg.budget;
        std::vector<SamplePath> paths;
        for (std::size_t i = 0; i < n; ++i) paths.push_back(polchinski_run(base, tg, wiener_increments(tg, d, cfg.seed, i), po));
        write_paths_csv(csv, paths, "tau");
    } else if (p == "rgd") {
        RgdConfig rc{cfg.eta, base, base.tractable() ? InnerSampler::exact : InnerSampler::rejection, 10000,
                     cfg.rgd_steps};
        // start from a draw of N(0, I) so the per-step KL of the law is finite
        Stream init(cfg.seed, 0, Lane::initial);
        const Vector x0 = init.normal_vector(d);
        const Matrix chain = rgd_chain(x0, rc, cfg.seed, 0);
        if (const auto* g = base.gaussian()) {
            const auto law =
                chain_law_propagate(GaussianMeasure(Vector::Zero(d), Matrix::Identity(d, d)), *g, cfg.eta, cfg.rgd_steps);
            write_chain_csv(csv, chain, &law.kl);
        } else {
            write_chain_csv(csv, chain);
        }
    } else {
        throw DomainError("simulate: unknown perspective '" + p + "'");
    }
}

}  // namespace sloc
