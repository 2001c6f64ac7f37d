#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cascadefit/models.hpp"

namespace cascadefit {

// Observation grid in hours. The integrator takes `substeps` RK4 steps per
// observation interval.
struct TimeGrid {
    double t0 = 0.0;
    double dt_obs = 1.0;
    std::size_t n_obs = 2;
    std::size_t substeps = 10;

    void validate() const;
    double time_at(std::size_t k) const noexcept { return t0 + dt_obs * static_cast<double>(k); }
    double step() const noexcept { return dt_obs / static_cast<double>(substeps); }
    bool operator==(const TimeGrid&) const = default;
};

// Row-major snapshots of the compartment vector at each observation time.
class Trajectory {
public:
    Trajectory(TimeGrid grid, std::size_t dim);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return grid_.n_obs; }

    std::span<const double> state(std::size_t k) const noexcept { return {data_.data() + k * dim_, dim_}; }
    std::span<double> state(std::size_t k) noexcept { return {data_.data() + k * dim_, dim_}; }
    ModelState state_copy(std::size_t k) const;

    bool operator==(const Trajectory&) const = default;

private:
    TimeGrid grid_;
    std::size_t dim_;
    std::vector<double> data_;
};

// Absolute clamp tolerance, as a fraction of N, for negative RK4 excursions.
inline constexpr double kClampTolerance = 1e-9;

// Classical fixed-step RK4. Negative entries no deeper than kClampTolerance*N
// are zeroed after each step with the mass taken back from S; deeper
// excursions raise StiffnessError, non-finite values DivergenceError.
Trajectory integrate(const ModelParams& params, std::span<const double> initial_state, double n,
                     const TimeGrid& grid);

struct InfectedSeries {
    // One series per infected compartment (three for CD-SEIZ, in Activity order).
    std::vector<std::vector<double>> channels;
    // Pointwise sum of the channels.
    std::vector<double> total;
};

InfectedSeries infected_series(const Trajectory& trajectory, ModelKind kind);

} // namespace cascadefit
