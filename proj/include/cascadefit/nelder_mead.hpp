#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace cascadefit::optim {

struct NelderMeadOptions {
    std::size_t max_evals = 2000;
    double xtol = 1e-6; // max vertex distance from the best vertex, per coordinate
    double ftol = 1e-8; // objective spread relative to the best value
    double initial_step = 0.1;
    double reflection = 1.0;
    double expansion = 2.0;
    double contraction = 0.5;
    double shrink = 0.5;
    // Fresh simplices built around the incumbent after convergence.
    std::size_t max_restarts = 0;
};

struct NelderMeadResult {
    std::vector<double> x;
    double f = 0.0;
    std::size_t n_evals = 0;
    bool converged = false;
    // Best objective value after initialization and after each iteration.
    std::vector<double> best_history;
};

using Objective = std::function<double(std::span<const double>)>;

// Downhill simplex minimization inside the box [lower, upper]. Trial points
// are projected onto the box before evaluation, so the objective never sees
// an out-of-bounds point. NaN objective values are treated as +infinity.
// `max_evals` covers the initial run and all restarts together.
NelderMeadResult nelder_mead(const Objective& objective, std::vector<double> start, std::span<const double> lower,
                             std::span<const double> upper, const NelderMeadOptions& options = {});

} // namespace cascadefit::optim
