#pragma once

// Synthetic ground truth: exact stochastic simulation (Gillespie direct
// method) of agent-level SEIZ / CD-SEIZ dynamics. Every ODE term becomes an
// exponential-clock reaction with the same rate, so the ensemble mean tracks
// the integrator's mean-field solution for large populations.
//
// The originating tweet is authored by the first initially infected agent;
// every later move into an I compartment, and every other initial infection,
// emits one reaction event whose parent is drawn uniformly from the cascade's
// earlier events.

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cascadefit/cascade.hpp"
#include "cascadefit/models.hpp"

namespace cascadefit {

struct SynthConfig {
    ModelKind model = ModelKind::SEIZ; // SEIZ or CDSEIZ
    ModelParams true_params = SeizParams{};
    std::size_t n_agents = 20000;
    // Initially infected agents per channel; SEIZ uses only the first entry.
    std::array<std::size_t, kActivityCount> i0{1, 0, 0};
    std::size_t horizon_hours = 48;
    std::uint64_t seed = 1;
    std::size_t n_cascades = 1;
    Timestamp start = Timestamp{std::chrono::seconds{1522540800}}; // 2018-04-01T00:00:00Z
    std::string id_prefix = "syn";

    void validate() const;
    std::size_t initial_infected() const noexcept;
};

struct SimulatedCascade {
    std::size_t index = 0;
    std::vector<TweetEvent> events; // root first, then in time order
    ModelParams true_params;
    // Compartment counts at hours 0..horizon, laid out like ModelState.
    std::vector<std::vector<std::int64_t>> hourly_states;
    std::size_t total_infections = 0; // including the root author
};

// RNG stream for cascade k is seeded from (seed, k), so each cascade is
// reproducible on its own.
SimulatedCascade simulate_cascade(const SynthConfig& config, std::size_t index);
std::vector<SimulatedCascade> simulate_stochastic(const SynthConfig& config);

// Deterministic target: the mean-field I(t) at hours 0..horizon, rounded to
// whole counts, per channel. Used as a noiseless fitting oracle.
ActivitySeries noiseless_series(const SynthConfig& config);

std::string events_jsonl(const SimulatedCascade& cascade);
std::string truth_json(const SynthConfig& config, const SimulatedCascade& cascade);

} // namespace cascadefit
