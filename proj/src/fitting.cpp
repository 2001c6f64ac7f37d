#include "cascadefit/fitting.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "cascadefit/errors.hpp"
#include "cascadefit/metrics.hpp"
#include "cascadefit/nelder_mead.hpp"
#include "json.hpp"

namespace cascadefit {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

bool is_probability_slot(ModelKind kind, std::size_t slot)
{
    switch (kind) {
    case ModelKind::SIS:
        return false;
    case ModelKind::SEIZ:
        return slot == 4 || slot == 5;
    case ModelKind::CDSEIZ:
        return slot >= 4 && slot <= 9;
    }
    return false;
}

} // namespace

std::size_t theta_size(ModelKind kind) noexcept
{
    switch (kind) {
    case ModelKind::SIS:
        return 3;
    case ModelKind::SEIZ:
        return 7;
    case ModelKind::CDSEIZ:
        break;
    }
    return 11;
}

const std::vector<std::string>& parameter_names(ModelKind kind)
{
    static const std::vector<std::string> sis{"beta", "lambda", "N"};
    static const std::vector<std::string> seiz{"beta", "b", "rho", "epsilon", "p", "l", "N"};
    static const std::vector<std::string> cdseiz{"beta", "b",  "rho", "epsilon", "p0", "p1",
                                                 "p2",   "l0", "l1",  "l2",      "N"};
    switch (kind) {
    case ModelKind::SIS:
        return sis;
    case ModelKind::SEIZ:
        return seiz;
    case ModelKind::CDSEIZ:
        break;
    }
    return cdseiz;
}

std::vector<double> pack(const ModelParams& params, double n)
{
    return std::visit(
        [n](const auto& q) -> std::vector<double> {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, SisParams>) {
                return {q.beta, q.lambda, n};
            } else if constexpr (std::is_same_v<T, SeizParams>) {
                return {q.beta, q.b, q.rho, q.epsilon, q.p, q.l, n};
            } else {
                return {q.beta, q.b, q.rho, q.epsilon, q.p[0], q.p[1], q.p[2], q.l[0], q.l[1], q.l[2], n};
            }
        },
        params);
}

UnpackedParams unpack(ModelKind kind, std::span<const double> theta)
{
    if (theta.size() != theta_size(kind))
        throw std::invalid_argument(fmt::format("{} parameter vector needs {} entries, got {}", to_string(kind),
                                                theta_size(kind), theta.size()));
    switch (kind) {
    case ModelKind::SIS:
        return {SisParams{theta[0], theta[1]}, theta[2]};
    case ModelKind::SEIZ:
        return {SeizParams{theta[0], theta[1], theta[2], theta[3], theta[4], theta[5]}, theta[6]};
    case ModelKind::CDSEIZ:
        break;
    }
    CdSeizParams q;
    q.beta = theta[0];
    q.b = theta[1];
    q.rho = theta[2];
    q.epsilon = theta[3];
    q.p = {theta[4], theta[5], theta[6]};
    q.l = {theta[7], theta[8], theta[9]};
    return {q, theta[10]};
}

std::vector<ParameterBounds> default_bounds(ModelKind kind, const ActivitySeries& target, double rate_cap)
{
    if (!(rate_cap > 0.0) || !std::isfinite(rate_cap))
        throw ConfigError(fmt::format("rate cap must be positive and finite (got {})", rate_cap));
    if (target.total.empty() || target.total.back() <= 0)
        throw DegenerateTargetError("target has no activity");
    const auto final_total = static_cast<double>(target.total.back());
    const auto first_total = static_cast<double>(target.total.front());
    std::vector<ParameterBounds> bounds(theta_size(kind));
    for (std::size_t k = 0; k + 1 < bounds.size(); ++k)
        bounds[k] = is_probability_slot(kind, k) ? ParameterBounds{0.0, 1.0} : ParameterBounds{0.0, rate_cap};
    bounds.back() = {std::max(final_total, first_total + 1.0), 100.0 * final_total};
    return bounds;
}

std::vector<ParameterBounds> apply_bounds_overrides(ModelKind kind, std::vector<ParameterBounds> bounds,
                                                     std::string_view json_text)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(fmt::format("bounds file is not valid JSON: {}", e.what()));
    }
    if (!doc.is_object())
        throw ConfigError("bounds file must hold a JSON object");
    const auto& names = parameter_names(kind);
    for (const auto& [key, value] : doc.items()) {
        const auto it = std::find(names.begin(), names.end(), key);
        if (it == names.end())
            throw ConfigError(fmt::format("'{}' is not a {} parameter", key, to_string(kind)));
        if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number())
            throw ConfigError(fmt::format("bounds for '{}' must be [lo, hi]", key));
        bounds[static_cast<std::size_t>(it - names.begin())] = {value[0].get<double>(), value[1].get<double>()};
    }
    return bounds;
}

void validate_bounds(ModelKind kind, std::span<const ParameterBounds> bounds, const ActivitySeries& target)
{
    const auto& names = parameter_names(kind);
    if (bounds.size() != names.size())
        throw ConfigError(fmt::format("{} needs {} parameter bounds, got {}", to_string(kind), names.size(),
                                      bounds.size()));
    for (std::size_t k = 0; k < bounds.size(); ++k) {
        const auto& b = bounds[k];
        if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || b.lo > b.hi)
            throw ConfigError(fmt::format("invalid bounds [{}, {}] for {}", b.lo, b.hi, names[k]));
        if (b.lo < 0.0)
            throw ConfigError(fmt::format("{} must be non-negative", names[k]));
        if (is_probability_slot(kind, k) && b.hi > 1.0)
            throw ConfigError(fmt::format("probability {} must stay within [0, 1]", names[k]));
    }
    const auto first_total = static_cast<double>(target.total.front());
    if (bounds.back().lo < first_total || bounds.back().lo <= 0.0)
        throw ConfigError(fmt::format("lower bound on N must be positive and at least I(0) = {}", first_total));
}

ModelState initial_state(ModelKind kind, const ActivitySeries& target, double n)
{
    ModelState state(model_dimension(kind), 0.0);
    if (kind == ModelKind::CDSEIZ) {
        double infected = 0.0;
        for (std::size_t c = 0; c < kActivityCount; ++c) {
            const auto i0 = static_cast<double>(target.cumulative[c].front());
            state[2 + 3 * c] = i0;
            infected += i0;
        }
        state[0] = n - infected;
    } else {
        const auto i0 = static_cast<double>(target.total.front());
        state[infected_indices(kind).front()] = i0;
        state[0] = n - i0;
    }
    return state;
}

namespace {

// Target converted once per fit; the objective runs tens of thousands of times.
class PreparedTarget {
public:
    PreparedTarget(const ActivitySeries& target, const FitConfig& config)
        : target_(target), kind_(config.model)
    {
        if (target.total.empty() || std::all_of(target.total.begin(), target.total.end(), [](auto v) { return v == 0; }))
            throw DegenerateTargetError("target series is all zero");
        grid_.t0 = 0.0;
        grid_.dt_obs = 1.0;
        grid_.n_obs = target.total.size();
        grid_.substeps = config.substeps;
        total_.assign(target.total.begin(), target.total.end());
        for (std::size_t c = 0; c < kActivityCount; ++c)
            channels_[c].assign(target.cumulative[c].begin(), target.cumulative[c].end());
        for (double v : total_)
            total_norm2_ += v * v;
        for (const auto& ch : channels_)
            for (double v : ch)
                channel_norm2_ += v * v;
        i0_ = static_cast<double>(target.total.front());
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    const std::vector<double>& total() const noexcept { return total_; }

    double operator()(std::span<const double> theta) const
    {
        const auto unpacked = unpack(kind_, theta);
        if (!(unpacked.n >= i0_) || !(unpacked.n > 0.0))
            return kInfinity;
        const ModelState x0 = initial_state(kind_, target_, unpacked.n);
        try {
            const Trajectory traj = integrate(unpacked.params, x0, unpacked.n, grid_);
            return score(traj);
        } catch (const IntegrationError&) {
            return kInfinity;
        } catch (const std::invalid_argument&) {
            return kInfinity;
        }
    }

private:
    double score(const Trajectory& traj) const
    {
        double residual = 0.0;
        if (kind_ == ModelKind::CDSEIZ) {
            const auto idx = infected_indices(kind_);
            for (std::size_t k = 0; k < traj.size(); ++k) {
                const auto s = traj.state(k);
                for (std::size_t c = 0; c < kActivityCount; ++c) {
                    const double r = s[idx[c]] - channels_[c][k];
                    residual += r * r;
                }
            }
            return std::sqrt(residual) / std::sqrt(channel_norm2_);
        }
        const std::size_t idx = infected_indices(kind_).front();
        for (std::size_t k = 0; k < traj.size(); ++k) {
            const double r = traj.state(k)[idx] - total_[k];
            residual += r * r;
        }
        return std::sqrt(residual) / std::sqrt(total_norm2_);
    }

    const ActivitySeries& target_;
    ModelKind kind_;
    TimeGrid grid_;
    std::vector<double> total_;
    std::array<std::vector<double>, kActivityCount> channels_;
    double total_norm2_ = 0.0;
    double channel_norm2_ = 0.0;
    double i0_ = 0.0;
};

struct StartOutcome {
    std::vector<double> theta;
    double f = kInfinity;
    std::size_t n_evals = 0;
    bool converged = false;
};

} // namespace

double objective(std::span<const double> theta, const ActivitySeries& target, const FitConfig& config)
{
    const PreparedTarget prepared(target, config);
    return prepared(theta);
}

std::vector<std::vector<double>> latin_hypercube(std::size_t count, std::size_t dim, std::uint64_t seed)
{
    std::vector<std::vector<double>> points(count, std::vector<double>(dim));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(0.0, 1.0);
    std::vector<std::size_t> strata(count);
    for (std::size_t j = 0; j < dim; ++j) {
        std::iota(strata.begin(), strata.end(), 0);
        std::shuffle(strata.begin(), strata.end(), rng);
        for (std::size_t k = 0; k < count; ++k)
            points[k][j] = (static_cast<double>(strata[k]) + jitter(rng)) / static_cast<double>(count);
    }
    return points;
}

FitResult fit(const ActivitySeries& target, const FitConfig& config)
{
    target.validate();
    if (target.n_obs() < config.min_points)
        throw std::invalid_argument(fmt::format("target has {} observations; fitting needs at least {}",
                                                target.n_obs(), config.min_points));
    if (target.total.back() <= 0)
        throw DegenerateTargetError("target has no activity");
    if (config.n_starts == 0)
        throw ConfigError("at least one start is required");
    if (config.substeps == 0)
        throw ConfigError("substeps must be positive");

    const ModelKind kind = config.model;
    const std::vector<ParameterBounds> bounds =
        config.bounds.empty() ? default_bounds(kind, target, config.rate_cap) : config.bounds;
    validate_bounds(kind, bounds, target);

    const PreparedTarget prepared(target, config);
    const std::size_t dim = bounds.size();
    auto to_theta = [&](std::span<const double> u) {
        std::vector<double> theta(dim);
        for (std::size_t j = 0; j < dim; ++j)
            theta[j] = bounds[j].lo + u[j] * (bounds[j].hi - bounds[j].lo);
        return theta;
    };
    const optim::Objective in_unit_cube = [&](std::span<const double> u) { return prepared(to_theta(u)); };

    optim::NelderMeadOptions nm;
    nm.max_evals = config.max_evals;
    nm.xtol = config.xtol;
    nm.ftol = config.ftol;
    nm.max_restarts = config.restarts;
    const std::vector<double> unit_lo(dim, 0.0);
    const std::vector<double> unit_hi(dim, 1.0);

    const auto starts = latin_hypercube(config.n_starts, dim, config.seed);
    std::vector<StartOutcome> outcomes(starts.size());
    auto run_start = [&](std::size_t s) {
        const auto r = optim::nelder_mead(in_unit_cube, starts[s], unit_lo, unit_hi, nm);
        outcomes[s] = {to_theta(r.x), r.f, r.n_evals, r.converged};
    };

    const std::size_t workers = std::clamp<std::size_t>(config.jobs, 1, starts.size());
    if (workers == 1) {
        for (std::size_t s = 0; s < starts.size(); ++s)
            run_start(s);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t s = next++; s < starts.size(); s = next++)
                    run_start(s);
            });
        }
    }

    FitResult result;
    result.model = kind;
    std::size_t best = 0;
    for (std::size_t s = 0; s < outcomes.size(); ++s) {
        result.n_evals += outcomes[s].n_evals;
        result.converged.push_back(outcomes[s].converged);
        result.start_objectives.push_back(outcomes[s].f);
        if (outcomes[s].f < outcomes[best].f)
            best = s;
    }
    if (!std::isfinite(outcomes[best].f))
        throw FitFailedError(fmt::format("{} fit failed: all {} starts ended with a non-finite objective "
                                         "({} evaluations)",
                                         to_string(kind), outcomes.size(), result.n_evals));

    const auto unpacked = unpack(kind, outcomes[best].theta);
    result.params = unpacked.params;
    result.n_fit = unpacked.n;
    result.initial_state = initial_state(kind, target, unpacked.n);
    result.objective = outcomes[best].f;
    result.best_start_index = best;
    const Trajectory traj = integrate(result.params, result.initial_state, result.n_fit, prepared.grid());
    result.trajectory = infected_series(traj, kind);
    result.error = fit_error(result.trajectory.total, prepared.total());
    result.mean_deviation = mean_deviation(result.trajectory.total, prepared.total());
    return result;
}

std::string fit_result_json(const FitResult& r)
{
    using ojson = nlohmann::ordered_json;
    ojson j;
    j["model"] = std::string(to_string(r.model));
    const auto theta = pack(r.params, r.n_fit);
    const auto& names = parameter_names(r.model);
    ojson params;
    for (std::size_t k = 0; k + 1 < names.size(); ++k)
        params[names[k]] = theta[k];
    j["params"] = std::move(params);
    j["n_fit"] = r.n_fit;
    j["initial_state"] = r.initial_state;
    j["error"] = r.error;
    j["mean_deviation"] = r.mean_deviation;
    j["objective"] = r.objective;
    ojson traj;
    traj["total"] = r.trajectory.total;
    if (r.model == ModelKind::CDSEIZ) {
        for (std::size_t c = 0; c < kActivityCount; ++c)
            traj[std::string(to_string(static_cast<Activity>(c)))] = r.trajectory.channels[c];
    }
    j["trajectory"] = std::move(traj);
    j["n_evals"] = r.n_evals;
    j["converged"] = r.converged;
    ojson starts = ojson::array();
    for (double f : r.start_objectives)
        starts.push_back(std::isfinite(f) ? ojson(f) : ojson(nullptr));
    j["start_objectives"] = std::move(starts);
    j["best_start_index"] = r.best_start_index;
    return j.dump(2) + "\n";
}

std::string fit_curve_csv(const FitResult& r, const ActivitySeries& target)
{
    const bool per_channel = r.model == ModelKind::CDSEIZ;
    std::string out = "hour,observed_total,model_total";
    if (per_channel)
        out += ",observed_retweet,model_retweet,observed_quote,model_quote,observed_reply,model_reply";
    out += '\n';
    for (std::size_t k = 0; k < r.trajectory.total.size(); ++k) {
        out += fmt::format("{},{},{}", k, target.total.at(k), r.trajectory.total[k]);
        if (per_channel) {
            for (std::size_t c = 0; c < kActivityCount; ++c)
                out += fmt::format(",{},{}", target.cumulative[c].at(k), r.trajectory.channels[c][k]);
        }
        out += '\n';
    }
    return out;
}

std::string fit_result_csv_header()
{
    return "cascade_id,model,error,mean_deviation,objective,n_fit,n_evals,best_start_index,theta";
}

std::string fit_result_csv_row(std::string_view cascade_id, const FitResult& r)
{
    std::string theta;
    for (double v : pack(r.params, r.n_fit)) {
        if (!theta.empty())
            theta += ';';
        theta += fmt::format("{}", v);
    }
    return fmt::format("{},{},{},{},{},{},{},{},{}", cascade_id, to_string(r.model), r.error, r.mean_deviation,
                       r.objective, r.n_fit, r.n_evals, r.best_start_index, theta);
}

} // namespace cascadefit
