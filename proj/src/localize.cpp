#include "sloc/localize.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "sloc/error.hpp"

namespace sloc {

namespace {

void check_noise(const TimeGrid& grid, const SamplePath& noise, Eigen::Index d) {
    if (!(noise.grid == grid)) throw DimensionError("noise path lives on a different grid");
    if (noise.dim() != d) throw DimensionError("noise dimension does not match the base");
}

Moments mean_of(const TargetMeasure& base, const Vector& c, const Regularizer& reg, Stream& rng,
                const SLOptions& opts) {
    if (base.tractable() && reg.is_scalar()) return {tilted_mean(base, c, reg.scalar()), Matrix(), 0.0, 0.0};
    return posterior_moments(tilt(base, c, reg), opts.budget, rng, opts.moments);
}

}  // namespace

std::vector<SLState> tilt_sde_run(const TargetMeasure& base, const TimeGrid& grid, const SamplePath& noise,
                                  const SLOptions& opts) {
    const Eigen::Index d = base.dim();
    check_noise(grid, noise, d);
    Stream rng(noise.seed, noise.stream_id, Lane::inner);
    std::vector<SLState> out;
    out.reserve(grid.size());
    SLState s;
    s.t = grid.front();
    s.c = Vector::Zero(d);
    s.reg = Regularizer(s.t);
    Moments mo = mean_of(base, s.c, s.reg, rng, opts);
    s.m = mo.mean;
    s.m_std_error = mo.std_error;
    out.push_back(s);
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const double dt = grid[k + 1] - grid[k];
        SLState n;
        n.c = s.c + s.m * dt + noise.increment(k);
        n.t = s.t + dt;
        n.reg = Regularizer(n.t);
        if (!n.c.allFinite()) throw NonFiniteError("tilt_sde_run: non-finite tilt", k + 1);
        mo = mean_of(base, n.c, n.reg, rng, opts);
        n.m = mo.mean;
        n.m_std_error = mo.std_error;
        out.push_back(n);
        s = std::move(n);
    }
    return out;
}

ChannelPath channel_path(const TargetMeasure& base, const TimeGrid& grid, std::uint64_t seed,
                         std::uint64_t stream_id, const SamplerOptions& sopts) {
    const Eigen::Index d = base.dim();
    Stream rng(seed, stream_id, Lane::target);
    Vector x = sample_base(base, rng, sopts);
    const bool from_zero = grid.front() == 0.0;
    const TimeGrid g = from_zero ? grid : grid.with_points({0.0});
    SamplePath b = wiener_increments(g, d, seed, stream_id);
    const Eigen::Index off = from_zero ? 0 : 1;
    Matrix c(static_cast<Eigen::Index>(grid.size()), d);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        c.row(r) = grid[k] * x.transpose() + b.states.row(r + off);
    }
    return {std::move(x), SamplePath{grid, std::move(c), seed, stream_id}};
}

double ParticleCloud::ess() const {
    return 1.0 / weights().squaredNorm();
}

double ParticleCloud::probability(const std::function<bool(const Vector&)>& in_set) const {
    double p = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        if (in_set(points.row(i).transpose())) p += std::exp(log_weights[i]);
    return p;
}

std::vector<ParticleCloud> particle_sl_run(const TargetMeasure& base, std::size_t n_particles, const TimeGrid& grid,
                                           const SamplePath& noise, const ParticleOptions& opts) {
    if (n_particles < 2) throw DomainError("particle_sl_run: need at least 2 particles");
    const Eigen::Index d = base.dim();
    check_noise(grid, noise, d);
    const auto n = static_cast<Eigen::Index>(n_particles);
    Stream rng(noise.seed, noise.stream_id, Lane::initial);
    ParticleCloud cloud;
    cloud.t = grid.front();
    cloud.points.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) cloud.points.row(i) = sample_base(base, rng, opts.sampler).transpose();
    cloud.log_weights = Vector::Constant(n, -std::log(static_cast<double>(n)));

    const std::size_t every = std::max<std::size_t>(1, opts.record_every);
    std::vector<ParticleCloud> out{cloud};
    Vector lw(n);
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const double dt = grid[k + 1] - grid[k];
        const Vector dw = noise.increment(k);
        const Vector m = cloud.mean();
        const Matrix r = cloud.points.rowwise() - m.transpose();
        lw = cloud.log_weights + r * dw - (0.5 * dt) * r.rowwise().squaredNorm();
        const double mx = lw.maxCoeff();
        const double log_sum = mx + std::log((lw.array() - mx).exp().sum());
        cloud.log_weights = lw.array() - log_sum;
        cloud.log_mass += log_sum;
        cloud.t = grid[k + 1];
        const double ess = cloud.ess();
        if (ess < opts.min_ess_fraction * static_cast<double>(n_particles))
            throw EstimatorError("particle_sl_run: weight collapse at t=" + std::to_string(cloud.t) +
                                     "; shorten the horizon or add particles",
                                 ess);
        if ((k + 1) % every == 0 || k + 1 == grid.steps()) out.push_back(cloud);
    }
    return out;
}

SLState anisotropic_step(const TargetMeasure& base, const SLState& state, const Matrix& C, double dt,
                         const Vector& dw, Stream& rng, const SLOptions& opts) {
    const Eigen::Index d = base.dim();
    if (state.reg.is_scalar()) throw DomainError("anisotropic_step: state reg must be a matrix");
    if (C.rows() != d || C.cols() != d || dw.size() != d || state.c.size() != d)
        throw DimensionError("anisotropic_step: dimension mismatch");
    const Matrix cct = C * C.transpose();
    SLState n;
    n.t = state.t + dt;
    n.c = state.c + (cct * state.m) * dt + C * dw;
    n.reg = Regularizer(Matrix(state.reg.raw_matrix() + cct * dt));
    const Moments mo = mean_of(base, n.c, n.reg, rng, opts);
    n.m = mo.mean;
    n.m_std_error = mo.std_error;
    return n;
}

std::vector<SLState> anisotropic_sl_run(const TargetMeasure& base, const TimeGrid& grid, const SamplePath& noise,
                                        const std::function<Matrix(double)>& control, const SLOptions& opts) {
    const Eigen::Index d = base.dim();
    check_noise(grid, noise, d);
    Stream rng(noise.seed, noise.stream_id, Lane::inner);
    SLState s;
    s.t = grid.front();
    s.c = Vector::Zero(d);
    s.reg = Regularizer(Matrix(Matrix::Zero(d, d)));
    const Moments mo = mean_of(base, s.c, Regularizer(0.0), rng, opts);
    s.m = mo.mean;
    s.m_std_error = mo.std_error;
    std::vector<SLState> out{s};
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        s = anisotropic_step(base, s, control(grid[k]), grid[k + 1] - grid[k], noise.increment(k), rng, opts);
        if (!s.c.allFinite()) throw NonFiniteError("anisotropic_sl_run: non-finite tilt", k + 1);
        out.push_back(s);
    }
    return out;
}

void write_sl_csv(std::ostream& os, std::uint64_t stream_id, const std::vector<SLState>& states, bool header) {
    if (states.empty()) return;
    const Eigen::Index d = states.front().c.size();
    if (header) {
        os << "stream_id,t";
        for (Eigen::Index j = 0; j < d; ++j) os << ",c_" << (j + 1);
        for (Eigen::Index j = 0; j < d; ++j) os << ",m_" << (j + 1);
        os << '\n';
    }
    os.precision(17);
    for (const auto& s : states) {
        os << stream_id << ',' << s.t;
        for (Eigen::Index j = 0; j < d; ++j) os << ',' << s.c[j];
        for (Eigen::Index j = 0; j < d; ++j) os << ',' << s.m[j];
        os << '\n';
    }
}

}  // namespace sloc
