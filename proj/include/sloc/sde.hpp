#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sloc/rng.hpp"
#include "sloc/targets.hpp"
#include "sloc/types.hpp"

namespace sloc {

inline constexpr double kDefaultEpsClip = 1e-4;

class TimeGrid {
public:
    /// Throws DomainError unless times are finite, >= 0 and strictly increasing.
    explicit TimeGrid(std::vector<double> times);

    static TimeGrid uniform(double t0, double t1, std::size_t steps);
    /// Log-uniform spacing; t0 > 0.
    static TimeGrid geometric(double t0, double t1, std::size_t steps);

    /// Same grid with extra points merged in (points already present are kept once).
    TimeGrid with_points(const std::vector<double>& pts) const;
    /// Index of the grid point equal to t within 1e-12 relative; throws if absent.
    std::size_t index_of(double t) const;

    std::size_t size() const noexcept { return t_.size(); }
    std::size_t steps() const noexcept { return t_.size() - 1; }
    double operator[](std::size_t k) const { return t_[k]; }
    double front() const { return t_.front(); }
    double back() const { return t_.back(); }
    const std::vector<double>& times() const noexcept { return t_; }

    bool operator==(const TimeGrid& o) const { return t_ == o.t_; }

private:
    std::vector<double> t_;
};

struct SamplePath {
    TimeGrid grid;
    Matrix states;  // (K+1) × d
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    Eigen::Index dim() const { return states.cols(); }
    Vector state(std::size_t k) const { return states.row(static_cast<Eigen::Index>(k)).transpose(); }
    Vector increment(std::size_t k) const {
        return (states.row(static_cast<Eigen::Index>(k + 1)) - states.row(static_cast<Eigen::Index>(k))).transpose();
    }
};

/// Brownian path W on `grid` with W(t₀) = 0, drawn from lane wiener of (seed, stream_id).
SamplePath wiener_increments(const TimeGrid& grid, Eigen::Index d, std::uint64_t seed, std::uint64_t stream_id);

struct DriftDiffusionSpec {
    std::function<Vector(const Vector&, double)> drift;
    /// Scalar diffusion coefficient σ(t); ignored when matrix_scale is set.
    std::function<double(double)> scalar_scale = [](double) { return 1.0; };
    std::function<Matrix(double)> matrix_scale;
    /// Point mass or Gaussian; Gaussian draws use lane initial of the noise path's stream.
    std::variant<Vector, GaussianMeasure> initial;
};

/// x_{k+1} = x_k + b(x_k, t_k)Δt + σ(t_k)ΔW_k. Throws NonFiniteError at the first non-finite state.
SamplePath euler_maruyama(const DriftDiffusionSpec& spec, const TimeGrid& grid, const SamplePath& noise);

struct TimeChangeMap {
    std::string name;
    std::function<double(double)> forward;
    std::function<double(double)> inverse;
    std::function<double(double)> inverse_derivative;
    bool increasing = true;

    TimeChangeMap inverted() const;
};

/// τ ↦ t = τ/(1−τ) on [0,1).
TimeChangeMap polchinski_to_sl_map();
/// t ↦ u = 1/(e^{2t}−1), inverse u ↦ ½log((u+1)/u).
TimeChangeMap ou_backward_map();
/// t ↦ T − t.
TimeChangeMap finite_horizon_map(double horizon);

/// Applies the map pointwise and re-sorts a decreasing image. Throws DomainError
/// if the map is non-finite at a grid point; singular endpoints must be clipped first.
TimeGrid time_change_grid(const TimeGrid& grid, const TimeChangeMap& map);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. fn must only write to slot i.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

/// CSV rows (stream_id, time, x_1..x_d).
void write_paths_csv(std::ostream& os, const std::vector<SamplePath>& paths, const std::string& time_name = "time");

}  // namespace sloc
