#include "cascadefit/integrator.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "cascadefit/errors.hpp"

namespace cascadefit {

void TimeGrid::validate() const
{
    if (!std::isfinite(t0))
        throw std::invalid_argument("time grid start must be finite");
    if (!std::isfinite(dt_obs) || dt_obs <= 0.0)
        throw std::invalid_argument(fmt::format("observation spacing must be positive (got {})", dt_obs));
    if (n_obs < 2)
        throw std::invalid_argument(fmt::format("time grid needs at least 2 observations (got {})", n_obs));
    if (substeps < 1)
        throw std::invalid_argument("substeps must be at least 1");
}

Trajectory::Trajectory(TimeGrid grid, std::size_t dim) : grid_(grid), dim_(dim), data_(grid.n_obs * dim, 0.0)
{
}

ModelState Trajectory::state_copy(std::size_t k) const
{
    const auto s = state(k);
    return {s.begin(), s.end()};
}

namespace {

template <std::size_t D, class Kernel>
void run_rk4(Kernel&& kernel, ModelKind kind, double n, Trajectory& out)
{
    const TimeGrid& grid = out.grid();
    const double h = grid.step();
    const double inv_n = 1.0 / n;
    const double tolerance = kClampTolerance * n;

    std::array<double, D> x{};
    std::array<double, D> k1{}, k2{}, k3{}, k4{}, tmp{};
    const auto first = out.state(0);
    for (std::size_t j = 0; j < D; ++j)
        x[j] = first[j];

    for (std::size_t obs = 1; obs < grid.n_obs; ++obs) {
        for (std::size_t sub = 0; sub < grid.substeps; ++sub) {
            kernel(x.data(), inv_n, k1.data());
            for (std::size_t j = 0; j < D; ++j)
                tmp[j] = x[j] + 0.5 * h * k1[j];
            kernel(tmp.data(), inv_n, k2.data());
            for (std::size_t j = 0; j < D; ++j)
                tmp[j] = x[j] + 0.5 * h * k2[j];
            kernel(tmp.data(), inv_n, k3.data());
            for (std::size_t j = 0; j < D; ++j)
                tmp[j] = x[j] + h * k3[j];
            kernel(tmp.data(), inv_n, k4.data());
            for (std::size_t j = 0; j < D; ++j)
                x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);

            const double t = grid.t0 + grid.dt_obs * static_cast<double>(obs - 1) +
                             h * static_cast<double>(sub + 1);
            double clamped = 0.0;
            for (std::size_t j = 0; j < D; ++j) {
                if (!std::isfinite(x[j]))
                    throw DivergenceError(t);
                if (x[j] < 0.0) {
                    if (-x[j] > tolerance)
                        throw StiffnessError(compartment_names(kind)[j], t, x[j]);
                    clamped += -x[j];
                    x[j] = 0.0;
                }
            }
            if (clamped > 0.0) {
                // Zeroing added mass; take it back from S, or from the
                // fullest compartment when S cannot cover it.
                std::size_t donor = 0;
                if (x[0] < clamped) {
                    for (std::size_t j = 1; j < D; ++j)
                        if (x[j] > x[donor])
                            donor = j;
                }
                x[donor] -= clamped;
            }
        }
        auto snapshot = out.state(obs);
        for (std::size_t j = 0; j < D; ++j)
            snapshot[j] = x[j];
    }
}

} // namespace

Trajectory integrate(const ModelParams& params, std::span<const double> initial_state, double n,
                     const TimeGrid& grid)
{
    grid.validate();
    validate(params);
    const ModelKind kind = kind_of(params);
    const std::size_t dim = model_dimension(kind);
    if (initial_state.size() != dim)
        throw std::invalid_argument(
            fmt::format("initial state has {} entries, {} expects {}", initial_state.size(), to_string(kind), dim));
    if (!std::isfinite(n) || n <= 0.0)
        throw std::invalid_argument(fmt::format("population size must be finite and positive (got {})", n));
    double total = 0.0;
    for (double v : initial_state) {
        if (!std::isfinite(v) || v < 0.0)
            throw std::invalid_argument("initial state entries must be finite and non-negative");
        total += v;
    }
    if (std::abs(total - n) > kClampTolerance * n)
        throw std::invalid_argument(fmt::format("initial state sums to {}, expected N = {}", total, n));

    Trajectory out(grid, dim);
    auto first = out.state(0);
    std::copy(initial_state.begin(), initial_state.end(), first.begin());

    std::visit(
        [&](const auto& q) {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, SisParams>) {
                run_rk4<2>([&q](const double* x, double inv_n, double* d) { detail::sis_kernel(x, q, inv_n, d); },
                           kind, n, out);
            } else if constexpr (std::is_same_v<T, SeizParams>) {
                run_rk4<4>([&q](const double* x, double inv_n, double* d) { detail::seiz_kernel(x, q, inv_n, d); },
                           kind, n, out);
            } else {
                run_rk4<10>(
                    [&q](const double* x, double inv_n, double* d) { detail::cdseiz_kernel(x, q, inv_n, d); }, kind,
                    n, out);
            }
        },
        params);
    return out;
}

InfectedSeries infected_series(const Trajectory& trajectory, ModelKind kind)
{
    if (trajectory.dim() != model_dimension(kind))
        throw std::invalid_argument(fmt::format("trajectory dimension {} does not match model {}", trajectory.dim(),
                                                to_string(kind)));
    const auto indices = infected_indices(kind);
    InfectedSeries series;
    series.channels.assign(indices.size(), std::vector<double>(trajectory.size()));
    series.total.assign(trajectory.size(), 0.0);
    for (std::size_t k = 0; k < trajectory.size(); ++k) {
        const auto s = trajectory.state(k);
        double sum = 0.0;
        for (std::size_t c = 0; c < indices.size(); ++c) {
            series.channels[c][k] = s[indices[c]];
            sum += s[indices[c]];
        }
        series.total[k] = sum;
    }
    return series;
}

} // namespace cascadefit
