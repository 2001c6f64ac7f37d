#include "cascadefit/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace cascadefit {

namespace {

void require_rate(double value, const char* name)
{
    if (!std::isfinite(value) || value < 0.0)
        throw std::invalid_argument(fmt::format("rate {} must be finite and non-negative (got {})", name, value));
}

void require_probability(double value, const char* name)
{
    if (!std::isfinite(value) || value < 0.0 || value > 1.0)
        throw std::invalid_argument(fmt::format("probability {} must lie in [0, 1] (got {})", name, value));
}

void check_inputs(std::span<const double> state, std::size_t expected, double n)
{
    if (state.size() != expected)
        throw std::invalid_argument(
            fmt::format("state has {} compartments, model expects {}", state.size(), expected));
    if (!std::isfinite(n) || n <= 0.0)
        throw std::invalid_argument(fmt::format("population size must be finite and positive (got {})", n));
    for (std::size_t k = 0; k < state.size(); ++k) {
        if (!std::isfinite(state[k]))
            throw std::invalid_argument(fmt::format("state entry {} is not finite", k));
        if (state[k] < 0.0)
            throw std::invalid_argument(fmt::format("state entry {} is negative ({})", k, state[k]));
    }
}

} // namespace

std::string_view to_string(ModelKind kind) noexcept
{
    switch (kind) {
    case ModelKind::SIS:
        return "sis";
    case ModelKind::SEIZ:
        return "seiz";
    case ModelKind::CDSEIZ:
        return "cdseiz";
    }
    return "unknown";
}

std::string_view to_string(Activity activity) noexcept
{
    switch (activity) {
    case Activity::Retweet:
        return "retweet";
    case Activity::Quote:
        return "quote";
    case Activity::Reply:
        return "reply";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view name)
{
    std::string lowered;
    for (char c : name) {
        if (c != '-' && c != '_')
            lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (lowered == "sis")
        return ModelKind::SIS;
    if (lowered == "seiz")
        return ModelKind::SEIZ;
    if (lowered == "cdseiz")
        return ModelKind::CDSEIZ;
    throw std::invalid_argument(fmt::format("unknown model '{}' (expected sis, seiz or cdseiz)", name));
}

std::size_t model_dimension(ModelKind kind) noexcept
{
    switch (kind) {
    case ModelKind::SIS:
        return 2;
    case ModelKind::SEIZ:
        return 4;
    case ModelKind::CDSEIZ:
        return 10;
    }
    return 0;
}

void SisParams::validate() const
{
    require_rate(beta, "beta");
    require_rate(lambda, "lambda");
}

void SeizParams::validate() const
{
    require_rate(beta, "beta");
    require_rate(b, "b");
    require_rate(rho, "rho");
    require_rate(epsilon, "epsilon");
    require_probability(p, "p");
    require_probability(l, "l");
}

void CdSeizParams::validate() const
{
    require_rate(beta, "beta");
    require_rate(b, "b");
    require_rate(rho, "rho");
    require_rate(epsilon, "epsilon");
    for (std::size_t c = 0; c < kActivityCount; ++c) {
        require_probability(p[c], "p_i");
        require_probability(l[c], "l_i");
    }
}

SeizParams CdSeizParams::channel(std::size_t i) const
{
    return SeizParams{beta, b, rho, epsilon, p.at(i), l.at(i)};
}

ModelKind kind_of(const ModelParams& params) noexcept
{
    switch (params.index()) {
    case 0:
        return ModelKind::SIS;
    case 1:
        return ModelKind::SEIZ;
    default:
        return ModelKind::CDSEIZ;
    }
}

void validate(const ModelParams& params)
{
    std::visit([](const auto& q) { q.validate(); }, params);
}

const std::vector<std::string>& compartment_names(ModelKind kind)
{
    static const std::vector<std::string> sis{"S", "I"};
    static const std::vector<std::string> seiz{"S", "E", "I", "Z"};
    static const std::vector<std::string> cdseiz{"S", "E_0", "I_0", "Z_0", "E_1", "I_1", "Z_1", "E_2", "I_2", "Z_2"};
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

std::span<const std::size_t> infected_indices(ModelKind kind) noexcept
{
    static constexpr std::array<std::size_t, 1> sis{1};
    static constexpr std::array<std::size_t, 1> seiz{2};
    static constexpr std::array<std::size_t, 3> cdseiz{2, 5, 8};
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

std::array<double, 2> sis_rhs(std::span<const double> state, const SisParams& params, double n)
{
    check_inputs(state, 2, n);
    params.validate();
    std::array<double, 2> d{};
    detail::sis_kernel(state.data(), params, 1.0 / n, d.data());
    return d;
}

std::array<double, 4> seiz_rhs(std::span<const double> state, const SeizParams& params, double n)
{
    check_inputs(state, 4, n);
    params.validate();
    std::array<double, 4> d{};
    detail::seiz_kernel(state.data(), params, 1.0 / n, d.data());
    return d;
}

std::array<double, 10> cdseiz_rhs(std::span<const double> state, const CdSeizParams& params, double n)
{
    check_inputs(state, 10, n);
    params.validate();
    std::array<double, 10> d{};
    detail::cdseiz_kernel(state.data(), params, 1.0 / n, d.data());
    return d;
}

std::vector<double> model_rhs(std::span<const double> state, const ModelParams& params, double n)
{
    return std::visit(
        [&](const auto& q) -> std::vector<double> {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, SisParams>) {
                const auto d = sis_rhs(state, q, n);
                return {d.begin(), d.end()};
            } else if constexpr (std::is_same_v<T, SeizParams>) {
                const auto d = seiz_rhs(state, q, n);
                return {d.begin(), d.end()};
            } else {
                const auto d = cdseiz_rhs(state, q, n);
                return {d.begin(), d.end()};
            }
        },
        params);
}

} // namespace cascadefit
