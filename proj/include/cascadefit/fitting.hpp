#pragma once

// Least-squares fitting of the compartmental models to a cumulative activity
// series. The search minimises the relative L2 error between model I(t) and
// the observed counts with bounded multi-start Nelder-Mead.
//
// Parameter vectors ("theta") are packed as
//   SIS    [beta, lambda, N]
//   SEIZ   [beta, b, rho, epsilon, p, l, N]
//   CDSEIZ [beta, b, rho, epsilon, p0, p1, p2, l0, l1, l2, N]

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cascadefit/cascade.hpp"
#include "cascadefit/integrator.hpp"
#include "cascadefit/models.hpp"

namespace cascadefit {

struct ParameterBounds {
    double lo = 0.0;
    double hi = 0.0;
    bool operator==(const ParameterBounds&) const = default;
};

std::size_t theta_size(ModelKind kind) noexcept;
const std::vector<std::string>& parameter_names(ModelKind kind);

std::vector<double> pack(const ModelParams& params, double n);

struct UnpackedParams {
    ModelParams params;
    double n = 0.0;
};
UnpackedParams unpack(ModelKind kind, std::span<const double> theta);

struct FitConfig {
    ModelKind model = ModelKind::SEIZ;
    // Empty means default_bounds() for the target.
    std::vector<ParameterBounds> bounds;
    std::size_t n_starts = 32;
    std::size_t max_evals = 2000; // per start, restarts included
    std::size_t restarts = 4;     // simplex rebuilds after convergence
    double xtol = 1e-6;
    double ftol = 1e-8;
    std::uint64_t seed = 1;
    std::size_t substeps = 10;
    double rate_cap = 10.0;
    std::size_t min_points = 8;
    std::size_t jobs = 1; // worker threads for independent starts

    bool operator==(const FitConfig&) const = default;
};

// Rates in [0, rate_cap], probabilities in [0, 1], and
// N in [max(total_last, I0 + 1), 100 * total_last].
std::vector<ParameterBounds> default_bounds(ModelKind kind, const ActivitySeries& target, double rate_cap = 10.0);

// Replaces entries of `bounds` named in a JSON object such as
// {"beta": [0, 2], "N": [1000, 5000]}. Unknown names raise ConfigError.
std::vector<ParameterBounds> apply_bounds_overrides(ModelKind kind, std::vector<ParameterBounds> bounds,
                                                     std::string_view json_text);

void validate_bounds(ModelKind kind, std::span<const ParameterBounds> bounds, const ActivitySeries& target);

// E(0) = Z(0) = 0, I(0) from the first observed bin (per channel for CD-SEIZ)
// and S(0) = N - I(0).
ModelState initial_state(ModelKind kind, const ActivitySeries& target, double n);

// Relative L2 error of the model started from initial_state(); for CD-SEIZ the
// three channel residuals are concatenated. Integration failures score +inf.
// Throws DegenerateTargetError for an all-zero target.
double objective(std::span<const double> theta, const ActivitySeries& target, const FitConfig& config);

struct FitResult {
    ModelKind model = ModelKind::SEIZ;
    ModelParams params;
    double n_fit = 0.0;
    ModelState initial_state;
    double error = 0.0;          // relative L2 error of the total series
    double mean_deviation = 0.0; // of the total series
    double objective = 0.0;      // minimised value (channel-resolved for CD-SEIZ)
    InfectedSeries trajectory;
    std::size_t n_evals = 0;
    std::vector<bool> converged;          // per start
    std::vector<double> start_objectives; // best value reached by each start
    std::size_t best_start_index = 0;
};

// Deterministic for a given (target, config): starts are Latin-hypercube
// samples of the bounds box drawn from `seed`, and ties between starts go to
// the lowest index. Throws FitFailedError when no start reaches a finite value.
FitResult fit(const ActivitySeries& target, const FitConfig& config);

// Latin-hypercube sample of `count` points in [0, 1]^dim.
std::vector<std::vector<double>> latin_hypercube(std::size_t count, std::size_t dim, std::uint64_t seed);

std::string fit_result_json(const FitResult& result);
// Hour, observed and fitted totals, plus per-channel columns for CD-SEIZ.
std::string fit_curve_csv(const FitResult& result, const ActivitySeries& target);
std::string fit_result_csv_header();
std::string fit_result_csv_row(std::string_view cascade_id, const FitResult& result);

} // namespace cascadefit
