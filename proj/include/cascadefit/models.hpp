#pragma once

// Compartmental models of information spread: SIS, SEIZ and the
// activity-resolved CD-SEIZ variant. Rates are per hour; N is the population.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cascadefit {

enum class ModelKind { SIS, SEIZ, CDSEIZ };

// Activity channels of CD-SEIZ, in parameter-subscript order.
enum class Activity : std::size_t { Retweet = 0, Quote = 1, Reply = 2 };
inline constexpr std::size_t kActivityCount = 3;

std::string_view to_string(ModelKind kind) noexcept;
std::string_view to_string(Activity activity) noexcept;
// Accepts "sis", "seiz", "cdseiz" (case-insensitive, "cd-seiz" too).
ModelKind parse_model_kind(std::string_view name);

std::size_t model_dimension(ModelKind kind) noexcept;

struct SisParams {
    double beta = 0.0;   // S -> I contact rate
    double lambda = 0.0; // I -> S recovery contact rate

    void validate() const;
    bool operator==(const SisParams&) const = default;
};

struct SeizParams {
    double beta = 0.0;    // S-I contact rate
    double b = 0.0;       // S-Z contact rate
    double rho = 0.0;     // E-I contact rate
    double epsilon = 0.0; // incubation rate
    double p = 0.0;       // P(S -> I | contact with I)
    double l = 0.0;       // P(S -> Z | contact with Z)

    void validate() const;
    bool operator==(const SeizParams&) const = default;
};

// Contact and incubation rates are shared by all channels; p and l are
// indexed by Activity.
struct CdSeizParams {
    double beta = 0.0;
    double b = 0.0;
    double rho = 0.0;
    double epsilon = 0.0;
    std::array<double, kActivityCount> p{};
    std::array<double, kActivityCount> l{};

    void validate() const;
    bool operator==(const CdSeizParams&) const = default;

    // The single-channel SEIZ system seen by channel i.
    SeizParams channel(std::size_t i) const;
};

using ModelParams = std::variant<SisParams, SeizParams, CdSeizParams>;

ModelKind kind_of(const ModelParams& params) noexcept;
void validate(const ModelParams& params);

// Flat compartment vector:
//   SIS    [S, I]
//   SEIZ   [S, E, I, Z]
//   CDSEIZ [S, E_0, I_0, Z_0, E_1, I_1, Z_1, E_2, I_2, Z_2]
using ModelState = std::vector<double>;

const std::vector<std::string>& compartment_names(ModelKind kind);
// Positions of the infected compartments (one for SIS/SEIZ, three for CD-SEIZ).
std::span<const std::size_t> infected_indices(ModelKind kind) noexcept;

std::array<double, 2> sis_rhs(std::span<const double> state, const SisParams& params, double n);
std::array<double, 4> seiz_rhs(std::span<const double> state, const SeizParams& params, double n);
std::array<double, 10> cdseiz_rhs(std::span<const double> state, const CdSeizParams& params, double n);

// Generic entry point; returns a vector of model_dimension(kind_of(params)).
std::vector<double> model_rhs(std::span<const double> state, const ModelParams& params, double n);

namespace detail {

// Unchecked kernels shared by the public RHS functions and the integrator.
// The integrator evaluates them at intermediate Runge-Kutta stages, which may
// sit marginally below zero, so no sign checks happen here.

inline void sis_kernel(const double* x, const SisParams& q, double inv_n, double* dx) noexcept
{
    const double infection = q.beta * x[0] * x[1] * inv_n;
    const double recovery = q.lambda * x[1] * inv_n;
    dx[0] = -infection + recovery;
    dx[1] = infection - recovery;
}

// One (S, E, I, Z) block. Writes dE, dI, dZ and returns the drain on S.
inline double seiz_block(double s, const double* eiz, double beta, double b, double rho, double epsilon,
                         double p, double l, double inv_n, double* d_eiz) noexcept
{
    const double e = eiz[0];
    const double i = eiz[1];
    const double z = eiz[2];
    const double si = beta * s * i * inv_n;
    const double sz = b * s * z * inv_n;
    const double ei = rho * e * i * inv_n;
    const double incubation = epsilon * e;
    d_eiz[0] = (1.0 - p) * si + (1.0 - l) * sz - ei - incubation;
    d_eiz[1] = p * si + ei + incubation;
    d_eiz[2] = l * sz;
    return si + sz;
}

inline void seiz_kernel(const double* x, const SeizParams& q, double inv_n, double* dx) noexcept
{
    dx[0] = -seiz_block(x[0], x + 1, q.beta, q.b, q.rho, q.epsilon, q.p, q.l, inv_n, dx + 1);
}

inline void cdseiz_kernel(const double* x, const CdSeizParams& q, double inv_n, double* dx) noexcept
{
    double drain = 0.0;
    for (std::size_t c = 0; c < kActivityCount; ++c) {
        const std::size_t off = 1 + 3 * c;
        drain += seiz_block(x[0], x + off, q.beta, q.b, q.rho, q.epsilon, q.p[c], q.l[c], inv_n, dx + off);
    }
    dx[0] = -drain;
}

} // namespace detail

} // namespace cascadefit
