#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sloc/bridge.hpp"
#include "sloc/diagnostics.hpp"
#include "sloc/error.hpp"
#include "sloc/localize.hpp"
#include "sloc/polchinski.hpp"
#include "sloc/rgd.hpp"

namespace py = pybind11;
using namespace sloc;

namespace {

TargetMeasure make_mixture(const std::vector<double>& weights, const std::vector<Vector>& means,
                           const std::vector<Matrix>& covs) {
    if (weights.size() != means.size() || weights.size() != covs.size())
        throw DimensionError("mixture: weights, means and covs must have the same length");
    std::vector<MixtureComponent> comps;
    for (std::size_t k = 0; k < weights.size(); ++k) comps.push_back({weights[k], GaussianMeasure(means[k], covs[k])});
    return TargetMeasure(GaussianMixture(std::move(comps)));
}

py::dict sl_run(const TargetMeasure& base, double horizon, std::size_t steps, std::uint64_t seed,
                std::uint64_t stream_id) {
    const auto grid = TimeGrid::uniform(0.0, horizon, steps);
    const auto run = tilt_sde_run(base, grid, wiener_increments(grid, base.dim(), seed, stream_id));
    Matrix c(static_cast<Eigen::Index>(run.size()), base.dim()), m(c.rows(), c.cols());
    for (std::size_t k = 0; k < run.size(); ++k) {
        c.row(static_cast<Eigen::Index>(k)) = run[k].c.transpose();
        m.row(static_cast<Eigen::Index>(k)) = run[k].m.transpose();
    }
    py::dict out;
    out["t"] = grid.times();
    out["c"] = c;
    out["m"] = m;
    return out;
}

}  // namespace

PYBIND11_MODULE(_sloc, m) {
    m.doc() = "Stochastic localization samplers and diagnostics";

    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<UnsupportedError>(m, "UnsupportedError", PyExc_NotImplementedError);
    py::register_exception<NonFiniteError>(m, "NonFiniteError", PyExc_FloatingPointError);
    py::register_exception<EstimatorError>(m, "EstimatorError", PyExc_RuntimeError);
    py::register_exception<SamplerError>(m, "SamplerError", PyExc_RuntimeError);

    py::class_<TargetMeasure>(m, "Target")
        .def_property_readonly("dim", &TargetMeasure::dim)
        .def_property_readonly("tractable", &TargetMeasure::tractable)
        .def("log_density", &TargetMeasure::log_density);

    m.def("gaussian", [](const Vector& mean, const Matrix& cov) { return TargetMeasure(GaussianMeasure(mean, cov)); },
          py::arg("mean"), py::arg("cov"));
    m.def("mixture", &make_mixture, py::arg("weights"), py::arg("means"), py::arg("covs"));
    m.def("potential", [](const std::string& name, Eigen::Index dim) { return TargetMeasure(builtin_potential(name, dim)); },
          py::arg("name"), py::arg("dim") = 1);

    m.def(
        "posterior_moments",
        [](const TargetMeasure& base, const Vector& c, double t, std::size_t budget, std::uint64_t seed) {
            Stream rng(seed, 0, Lane::inner);
            const auto mo = posterior_moments(tilt(base, c, Regularizer(t)), budget, rng);
            return py::make_tuple(mo.mean, mo.cov, mo.std_error);
        },
        py::arg("base"), py::arg("c"), py::arg("t"), py::arg("budget") = 2000, py::arg("seed") = 0);
    m.def(
        "log_partition", [](const TargetMeasure& base, const Vector& c, double t) {
            return log_partition(tilt(base, c, Regularizer(t)));
        },
        py::arg("base"), py::arg("c"), py::arg("t"));
    m.def(
        "sample",
        [](const TargetMeasure& base, const Vector& c, double t, std::size_t n, std::uint64_t seed) {
            Stream rng(seed, 0, Lane::target);
            return sample(tilt(base, c, Regularizer(t)), n, rng);
        },
        py::arg("base"), py::arg("c"), py::arg("t"), py::arg("n"), py::arg("seed") = 0);

    m.def("tilt_sde", &sl_run, py::arg("base"), py::arg("horizon"), py::arg("steps"), py::arg("seed"),
          py::arg("stream_id") = 0);
    m.def(
        "channel",
        [](const TargetMeasure& base, double horizon, std::size_t steps, std::uint64_t seed, std::uint64_t stream_id) {
            const auto p = channel_path(base, TimeGrid::uniform(0.0, horizon, steps), seed, stream_id);
            return py::make_tuple(p.x, p.c.states);
        },
        py::arg("base"), py::arg("horizon"), py::arg("steps"), py::arg("seed"), py::arg("stream_id") = 0);
    m.def(
        "polchinski",
        [](const TargetMeasure& base, double tau_end, std::size_t steps, std::uint64_t seed, std::uint64_t stream_id) {
            const auto grid = TimeGrid::uniform(0.0, tau_end, steps);
            return polchinski_run(base, grid, wiener_increments(grid, base.dim(), seed, stream_id)).states;
        },
        py::arg("base"), py::arg("tau_end"), py::arg("steps"), py::arg("seed"), py::arg("stream_id") = 0);
    m.def(
        "renorm_potential",
        [](const TargetMeasure& base, double tau, const Vector& x) {
            const auto r = renorm_potential(base, tau, x);
            return py::make_tuple(r.value, r.gradient);
        },
        py::arg("base"), py::arg("tau"), py::arg("x"));
    m.def(
        "lsi_schedule",
        [](double alpha, const std::vector<double>& taus) {
            const auto s = lsi_schedule(alpha);
            py::dict out;
            std::vector<double> l, L, g;
            for (double t : taus) {
                l.push_back(s.lambda(t));
                L.push_back(s.Lambda(t));
                g.push_back(s.gamma(t));
            }
            out["lambda"] = l;
            out["Lambda"] = L;
            out["gamma"] = g;
            return out;
        },
        py::arg("alpha"), py::arg("taus"));
    m.def("stability_factor", &stability_factor, py::arg("alpha"), py::arg("tau"));

    m.def(
        "sinkhorn",
        [](const Vector& mu, const Vector& pi, const Matrix& log_kernel, double tol, std::size_t max_iter) {
            const auto r = sinkhorn_log(mu, pi, log_kernel, tol, max_iter);
            return py::make_tuple(r.coupling.gamma, r.residual, r.iterations);
        },
        py::arg("mu"), py::arg("pi"), py::arg("log_kernel"), py::arg("tol") = 1e-10, py::arg("max_iter") = 10000);
    m.def(
        "chain_law",
        [](const Vector& m0, const Matrix& s0, const Vector& mt, const Matrix& st, double eta, std::size_t steps) {
            const auto law = chain_law_propagate(GaussianMeasure(m0, s0), GaussianMeasure(mt, st), eta, steps);
            return py::make_tuple(law.kl, law.ratios);
        },
        py::arg("init_mean"), py::arg("init_cov"), py::arg("target_mean"), py::arg("target_cov"), py::arg("eta"),
        py::arg("steps"));
    m.def("lsi_lower_bound", &lsi_lower_bound, py::arg("alpha"), py::arg("eta"));

    m.def("gaussian_kl", &gaussian_kl, py::arg("m1"), py::arg("s1"), py::arg("m2"), py::arg("s2"));
    m.def(
        "ks_two_sample",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            const auto r = ks_two_sample(a, b);
            return py::make_tuple(r.statistic, r.p_value);
        },
        py::arg("a"), py::arg("b"));
}
