#include "cascadefit/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cascadefit::optim {

namespace {

struct Vertex {
    std::vector<double> x;
    double f;
};

} // namespace

namespace {

NelderMeadResult run_simplex(const Objective& objective, std::vector<double> start, std::span<const double> lower,
                             std::span<const double> upper, const NelderMeadOptions& options)
{
    const std::size_t dim = start.size();
    if (dim == 0 || lower.size() != dim || upper.size() != dim)
        throw std::invalid_argument("Nelder-Mead: start and bounds must have the same non-zero length");
    for (std::size_t j = 0; j < dim; ++j)
        if (!(lower[j] <= upper[j]))
            throw std::invalid_argument("Nelder-Mead: lower bound exceeds upper bound");
    if (options.max_evals < dim + 1)
        throw std::invalid_argument("Nelder-Mead: evaluation budget smaller than the simplex");

    NelderMeadResult result;
    auto project = [&](std::vector<double>& x) {
        for (std::size_t j = 0; j < dim; ++j)
            x[j] = std::clamp(x[j], lower[j], upper[j]);
    };
    auto evaluate = [&](std::vector<double> x) -> Vertex {
        project(x);
        ++result.n_evals;
        double f = objective(x);
        if (std::isnan(f))
            f = std::numeric_limits<double>::infinity();
        return {std::move(x), f};
    };

    std::vector<Vertex> simplex;
    simplex.reserve(dim + 1);
    simplex.push_back(evaluate(start));
    for (std::size_t j = 0; j < dim; ++j) {
        std::vector<double> x = simplex.front().x;
        const double step = options.initial_step * (upper[j] - lower[j]);
        x[j] = x[j] + step <= upper[j] ? x[j] + step : x[j] - step;
        simplex.push_back(evaluate(std::move(x)));
    }

    auto by_value = [](const Vertex& a, const Vertex& b) { return a.f < b.f; };
    std::stable_sort(simplex.begin(), simplex.end(), by_value);
    result.best_history.push_back(simplex.front().f);

    auto converged = [&] {
        const Vertex& best = simplex.front();
        double xspread = 0.0;
        double fspread = 0.0;
        for (std::size_t v = 1; v <= dim; ++v) {
            for (std::size_t j = 0; j < dim; ++j)
                xspread = std::max(xspread, std::abs(simplex[v].x[j] - best.x[j]));
            fspread = std::max(fspread, std::abs(simplex[v].f - best.f));
        }
        if (!std::isfinite(fspread))
            return false;
        return xspread <= options.xtol && fspread <= options.ftol * std::max(std::abs(best.f), 1e-300);
    };

    std::vector<double> centroid(dim);
    auto along = [&](double factor, const std::vector<double>& from) {
        std::vector<double> x(dim);
        for (std::size_t j = 0; j < dim; ++j)
            x[j] = centroid[j] + factor * (from[j] - centroid[j]);
        return x;
    };

    while (result.n_evals + 2 <= options.max_evals) {
        if (converged()) {
            result.converged = true;
            break;
        }
        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t v = 0; v < dim; ++v)
            for (std::size_t j = 0; j < dim; ++j)
                centroid[j] += simplex[v].x[j];
        for (double& c : centroid)
            c /= static_cast<double>(dim);

        Vertex& worst = simplex.back();
        const double second_worst = simplex[dim - 1].f;
        const double best = simplex.front().f;

        Vertex reflected = evaluate(along(-options.reflection, worst.x));
        if (reflected.f < best) {
            Vertex expanded = evaluate(along(-options.reflection * options.expansion, worst.x));
            worst = expanded.f < reflected.f ? std::move(expanded) : std::move(reflected);
        } else if (reflected.f < second_worst) {
            worst = std::move(reflected);
        } else {
            const bool outside = reflected.f < worst.f;
            Vertex contracted = outside ? evaluate(along(options.contraction, reflected.x))
                                        : evaluate(along(options.contraction, worst.x));
            const double threshold = outside ? reflected.f : worst.f;
            const bool accept = outside ? contracted.f <= threshold : contracted.f < threshold;
            if (accept) {
                worst = std::move(contracted);
            } else {
                for (std::size_t v = 1; v <= dim && result.n_evals < options.max_evals; ++v) {
                    std::vector<double> x(dim);
                    for (std::size_t j = 0; j < dim; ++j)
                        x[j] = simplex[0].x[j] + options.shrink * (simplex[v].x[j] - simplex[0].x[j]);
                    simplex[v] = evaluate(std::move(x));
                }
            }
        }
        std::stable_sort(simplex.begin(), simplex.end(), by_value);
        result.best_history.push_back(simplex.front().f);
    }
    if (!result.converged)
        result.converged = converged();

    result.x = simplex.front().x;
    result.f = simplex.front().f;
    return result;
}

} // namespace

NelderMeadResult nelder_mead(const Objective& objective, std::vector<double> start, std::span<const double> lower,
                             std::span<const double> upper, const NelderMeadOptions& options)
{
    NelderMeadResult result = run_simplex(objective, std::move(start), lower, upper, options);
    // A converged simplex may have collapsed onto a box face or a ridge.
    // Rebuild it around the incumbent while budget remains and restarts keep
    // paying off.
    const std::size_t dim = result.x.size();
    for (std::size_t r = 0; r < options.max_restarts && result.converged; ++r) {
        if (result.n_evals + 2 * (dim + 1) > options.max_evals)
            break;
        NelderMeadOptions next = options;
        next.max_evals = options.max_evals - result.n_evals;
        NelderMeadResult again = run_simplex(objective, result.x, lower, upper, next);
        const bool improved = again.f < result.f - options.ftol * std::abs(result.f);
        result.n_evals += again.n_evals;
        for (double f : again.best_history)
            result.best_history.push_back(std::min(f, result.best_history.back()));
        if (again.f < result.f) {
            result.x = std::move(again.x);
            result.f = again.f;
        }
        result.converged = again.converged;
        if (!improved)
            break;
    }
    return result;
}

} // namespace cascadefit::optim
