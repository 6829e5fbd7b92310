#include "sloc/sde.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "sloc/error.hpp"

namespace sloc {

TimeGrid::TimeGrid(std::vector<double> times) : t_(std::move(times)) {
    if (t_.empty()) throw DomainError("time grid: empty");
    for (std::size_t k = 0; k < t_.size(); ++k) {
        if (!std::isfinite(t_[k]) || t_[k] < 0.0) throw DomainError("time grid: times must be finite and >= 0");
        if (k > 0 && !(t_[k] > t_[k - 1])) throw DomainError("time grid: times must be strictly increasing");
    }
}

TimeGrid TimeGrid::uniform(double t0, double t1, std::size_t steps) {
    if (steps == 0 || !(t1 > t0)) throw DomainError("uniform grid: need t1 > t0 and steps > 0");
    std::vector<double> t(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) t[k] = t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(steps);
    t.back() = t1;
    return TimeGrid(std::move(t));
}

TimeGrid TimeGrid::geometric(double t0, double t1, std::size_t steps) {
    if (steps == 0 || !(t0 > 0.0) || !(t1 > t0)) throw DomainError("geometric grid: need 0 < t0 < t1 and steps > 0");
    std::vector<double> t(steps + 1);
    const double l0 = std::log(t0), l1 = std::log(t1);
    for (std::size_t k = 0; k <= steps; ++k)
        t[k] = std::exp(l0 + (l1 - l0) * static_cast<double>(k) / static_cast<double>(steps));
    t.front() = t0;
    t.back() = t1;
    return TimeGrid(std::move(t));
}

TimeGrid TimeGrid::with_points(const std::vector<double>& pts) const {
    std::vector<double> t = t_;
    for (double p : pts) {
        const bool present = std::any_of(t.begin(), t.end(), [&](double s) {
            return std::abs(s - p) <= 1e-12 * std::max(1.0, std::abs(p));
        });
        if (!present) t.push_back(p);
    }
    std::sort(t.begin(), t.end());
    return TimeGrid(std::move(t));
}

std::size_t TimeGrid::index_of(double t) const {
    for (std::size_t k = 0; k < t_.size(); ++k)
        if (std::abs(t_[k] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return k;
    throw DomainError("time grid: " + std::to_string(t) + " is not a grid point");
}

SamplePath wiener_increments(const TimeGrid& grid, Eigen::Index d, std::uint64_t seed, std::uint64_t stream_id) {
    if (d < 1) throw DimensionError("wiener_increments: dimension must be at least 1");
    Stream rng(seed, stream_id, Lane::wiener);
    Matrix w(static_cast<Eigen::Index>(grid.size()), d);
    w.row(0).setZero();
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const double sd = std::sqrt(grid[k + 1] - grid[k]);
        const auto r = static_cast<Eigen::Index>(k);
        for (Eigen::Index j = 0; j < d; ++j) w(r + 1, j) = w(r, j) + sd * rng.normal();
    }
    return {grid, std::move(w), seed, stream_id};
}

SamplePath euler_maruyama(const DriftDiffusionSpec& spec, const TimeGrid& grid, const SamplePath& noise) {
    if (!(noise.grid == grid)) throw DimensionError("euler_maruyama: noise path lives on a different grid");
    const Eigen::Index d = noise.dim();
    Vector x;
    if (const auto* p = std::get_if<Vector>(&spec.initial)) {
        x = *p;
    } else {
        const auto& g = std::get<GaussianMeasure>(spec.initial);
        Stream rng(noise.seed, noise.stream_id, Lane::initial);
        x = g.mean() + g.chol() * rng.normal_vector(g.dim());
    }
    if (x.size() != d) throw DimensionError("euler_maruyama: initial state and noise dimensions differ");
    Matrix out(static_cast<Eigen::Index>(grid.size()), d);
    out.row(0) = x.transpose();
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const double t = grid[k], dt = grid[k + 1] - grid[k];
        const Vector dw = noise.increment(k);
        const Vector b = spec.drift(x, t);
        if (spec.matrix_scale)
            x = x + b * dt + spec.matrix_scale(t) * dw;
        else
            x = x + b * dt + spec.scalar_scale(t) * dw;
        if (!x.allFinite()) throw NonFiniteError("euler_maruyama: non-finite state", k + 1);
        out.row(static_cast<Eigen::Index>(k + 1)) = x.transpose();
    }
    return {grid, std::move(out), noise.seed, noise.stream_id};
}

TimeChangeMap TimeChangeMap::inverted() const {
    TimeChangeMap m;
    m.name = name + "^-1";
    m.forward = inverse;
    m.inverse = forward;
    auto inv = inverse_derivative;
    auto fwd = forward;
    // derivative of the new inverse (old forward) via the inverse function rule
    m.inverse_derivative = [inv, fwd](double x) { return 1.0 / inv(fwd(x)); };
    m.increasing = increasing;
    return m;
}

TimeChangeMap polchinski_to_sl_map() {
    return {"polchinski_to_sl", [](double tau) { return tau / (1.0 - tau); },
            [](double t) { return t / (1.0 + t); }, [](double t) { return 1.0 / ((1.0 + t) * (1.0 + t)); }, true};
}

TimeChangeMap ou_backward_map() {
    return {"ou_backward", [](double t) { return 1.0 / std::expm1(2.0 * t); },
            [](double u) { return 0.5 * std::log1p(1.0 / u); },
            [](double u) { return -1.0 / (2.0 * u * (u + 1.0)); }, false};
}

TimeChangeMap finite_horizon_map(double horizon) {
    return {"finite_horizon", [horizon](double t) { return horizon - t; },
            [horizon](double u) { return horizon - u; }, [](double) { return -1.0; }, false};
}

TimeGrid time_change_grid(const TimeGrid& grid, const TimeChangeMap& map) {
    std::vector<double> out;
    out.reserve(grid.size());
    for (double t : grid.times()) {
        const double v = map.forward(t);
        if (!std::isfinite(v))
            throw DomainError("time_change_grid: map '" + map.name + "' undefined at " + std::to_string(t) +
                              "; clip the endpoint first");
        out.push_back(v);
    }
    if (!map.increasing) std::reverse(out.begin(), out.end());
    return TimeGrid(std::move(out));
}

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    const unsigned w = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    for (unsigned k = 0; k < w; ++k) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!err) err = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

void write_paths_csv(std::ostream& os, const std::vector<SamplePath>& paths, const std::string& time_name) {
    if (paths.empty()) return;
    os << "stream_id," << time_name;
    for (Eigen::Index j = 0; j < paths.front().dim(); ++j) os << ",x_" << (j + 1);
    os << '\n';
    os.precision(17);
    for (const auto& p : paths)
        for (std::size_t k = 0; k < p.grid.size(); ++k) {
            os << p.stream_id << ',' << p.grid[k];
            for (Eigen::Index j = 0; j < p.dim(); ++j) os << ',' << p.states(static_cast<Eigen::Index>(k), j);
            os << '\n';
        }
}

}  // namespace sloc
