#include <numeric>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "cascadefit/errors.hpp"
#include "cascadefit/synth.hpp"

using namespace cascadefit;

namespace {

SynthConfig seiz_config()
{
    SynthConfig c;
    c.model = ModelKind::SEIZ;
    c.true_params = SeizParams{0.8, 0.3, 0.2, 0.15, 0.3, 0.5};
    c.n_agents = 2000;
    c.i0 = {3, 0, 0};
    c.horizon_hours = 24;
    c.seed = 42;
    return c;
}

SynthConfig cdseiz_config(std::array<double, 3> p)
{
    SynthConfig c;
    c.model = ModelKind::CDSEIZ;
    CdSeizParams q;
    q.beta = 0.8;
    q.b = 0.3;
    q.rho = 0.2;
    q.epsilon = 0.1;
    q.p = p;
    q.l = {0.3, 0.3, 0.3};
    c.true_params = q;
    c.n_agents = 3000;
    c.i0 = {2, 2, 2};
    c.horizon_hours = 24;
    return c;
}

} // namespace

TEST(Synth, NoInfectionPathwayLeavesOnlyRoot)
{
    SynthConfig c = seiz_config();
    c.true_params = SeizParams{0.0, 0.7, 0.0, 0.0, 0.5, 0.5};
    c.i0 = {1, 0, 0};
    const SimulatedCascade s = simulate_cascade(c, 0);
    ASSERT_EQ(s.events.size(), 1u);
    EXPECT_EQ(s.events[0].action, Action::Root);
    EXPECT_EQ(s.events[0].timestamp, c.start);
    EXPECT_EQ(s.total_infections, 1u);
}

TEST(Synth, EventsFormOneCascade)
{
    const SimulatedCascade s = simulate_cascade(seiz_config(), 3);
    ASSERT_GT(s.events.size(), 10u);
    const BuildResult built = build_cascades(s.events);
    ASSERT_EQ(built.trees.size(), 1u);
    EXPECT_TRUE(built.orphans.empty());
    EXPECT_EQ(built.trees[0].root_id(), s.events.front().id);
    EXPECT_EQ(built.trees[0].size() + 1, s.total_infections);
    for (std::size_t k = 1; k < s.events.size(); ++k)
        EXPECT_LE(s.events[k - 1].timestamp, s.events[k].timestamp);
}

TEST(Synth, HourlyStatesConserveAgents)
{
    const SynthConfig c = seiz_config();
    const SimulatedCascade s = simulate_cascade(c, 1);
    ASSERT_EQ(s.hourly_states.size(), c.horizon_hours + 1);
    for (const auto& x : s.hourly_states) {
        EXPECT_EQ(std::accumulate(x.begin(), x.end(), std::int64_t{0}), static_cast<std::int64_t>(c.n_agents));
        for (auto v : x)
            EXPECT_GE(v, 0);
    }
    // Infected counts never fall, and the last snapshot matches the event log.
    for (std::size_t h = 1; h < s.hourly_states.size(); ++h)
        EXPECT_GE(s.hourly_states[h][2], s.hourly_states[h - 1][2]);
    EXPECT_EQ(static_cast<std::size_t>(s.hourly_states.back()[2]), s.total_infections);
}

TEST(Synth, SeededReproducibility)
{
    SynthConfig c = seiz_config();
    c.n_cascades = 3;
    const auto a = simulate_stochastic(c);
    const auto b = simulate_stochastic(c);
    ASSERT_EQ(a.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(a[k].events, b[k].events);
        EXPECT_EQ(events_jsonl(a[k]), events_jsonl(b[k]));
        EXPECT_EQ(simulate_cascade(c, k).events, a[k].events);
    }
    EXPECT_NE(a[0].events, a[1].events);
}

TEST(Synth, EventLogRoundTrips)
{
    const SimulatedCascade s = simulate_cascade(cdseiz_config({0.5, 0.5, 0.5}), 0);
    std::istringstream in(events_jsonl(s));
    const ParseResult r = parse_events(in, ParseOptions{true});
    EXPECT_EQ(r.events, s.events);
}

TEST(Synth, AllActionTypesAppear)
{
    const SimulatedCascade s = simulate_cascade(cdseiz_config({0.6, 0.3, 0.2}), 0);
    std::set<Action> seen;
    for (const auto& e : s.events)
        seen.insert(e.action);
    EXPECT_EQ(seen.size(), 4u);
}

TEST(Synth, RetweetDominatesWithHighP)
{
    SynthConfig c = cdseiz_config({0.9, 0.1, 0.1});
    c.seed = 2024;
    std::size_t dominant = 0;
    for (std::size_t k = 0; k < 100; ++k) {
        const SimulatedCascade s = simulate_cascade(c, k);
        const auto& last = s.hourly_states.back();
        dominant += last[2] > last[5] && last[2] > last[8];
    }
    EXPECT_GE(dominant, 95u);
}

TEST(Synth, RejectsInvalidConfigs)
{
    SynthConfig c = seiz_config();
    c.horizon_hours = 7;
    EXPECT_THROW(c.validate(), ConfigError);
    c = seiz_config();
    c.i0 = {0, 0, 0};
    EXPECT_THROW(c.validate(), ConfigError);
    c = seiz_config();
    c.n_agents = 3;
    EXPECT_THROW(c.validate(), ConfigError);
    c = seiz_config();
    c.true_params = SisParams{0.5, 0.1};
    EXPECT_THROW(c.validate(), ConfigError);
    c = seiz_config();
    c.true_params = SeizParams{0.8, 0.3, 0.2, 0.15, 1.5, 0.5};
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Synth, NoiselessSeriesIsRoundedOde)
{
    const SynthConfig c = seiz_config();
    const ActivitySeries s = noiseless_series(c);
    EXPECT_EQ(s.n_obs(), c.horizon_hours + 1);
    EXPECT_EQ(s.total[0], 3);
    EXPECT_NO_THROW(s.validate());
    for (std::size_t k = 1; k < s.n_obs(); ++k)
        EXPECT_GE(s.total[k], s.total[k - 1]);
}
