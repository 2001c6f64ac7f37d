#include "cascadefit/synth.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "cascadefit/errors.hpp"
#include "cascadefit/integrator.hpp"
#include "json.hpp"

namespace cascadefit {

void SynthConfig::validate() const
{
    if (model != ModelKind::SEIZ && model != ModelKind::CDSEIZ)
        throw ConfigError("synthetic cascades support the seiz and cdseiz models only");
    if (kind_of(true_params) != model)
        throw ConfigError(fmt::format("true parameters do not belong to model {}", to_string(model)));
    try {
        cascadefit::validate(true_params);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (model == ModelKind::SEIZ && (i0[0] < 1 || i0[1] != 0 || i0[2] != 0))
        throw ConfigError("SEIZ synthesis needs i0 >= 1 in the single channel");
    if (initial_infected() < 1)
        throw ConfigError("at least one channel needs an initially infected agent");
    if (n_agents <= initial_infected())
        throw ConfigError(fmt::format("population {} must exceed the {} initially infected agents", n_agents,
                                      initial_infected()));
    if (horizon_hours < 8)
        throw ConfigError(fmt::format("horizon must be at least 8 hours (got {})", horizon_hours));
    if (n_cascades < 1)
        throw ConfigError("n_cascades must be positive");
}

std::size_t SynthConfig::initial_infected() const noexcept
{
    return i0[0] + i0[1] + i0[2];
}

namespace {

// Reactions of one (E, I, Z) channel, mirroring the ODE terms one by one.
enum Reaction : std::size_t {
    DirectInfection = 0, // S -> I   p beta S I / N
    ExposureByI = 1,     // S -> E   (1-p) beta S I / N
    Skepticism = 2,      // S -> Z   l b S Z / N
    ExposureByZ = 3,     // S -> E   (1-l) b S Z / N
    ContactAdoption = 4, // E -> I   rho E I / N
    Incubation = 5,      // E -> I   epsilon E
    ReactionsPerChannel = 6
};

struct Channel {
    std::int64_t e = 0;
    std::int64_t i = 0;
    std::int64_t z = 0;
};

Action channel_action(ModelKind model, std::size_t c)
{
    if (model == ModelKind::SEIZ)
        return Action::Retweet;
    switch (static_cast<Activity>(c)) {
    case Activity::Retweet:
        return Action::Retweet;
    case Activity::Quote:
        return Action::Quote;
    case Activity::Reply:
        break;
    }
    return Action::Reply;
}

} // namespace

SimulatedCascade simulate_cascade(const SynthConfig& config, std::size_t index)
{
    config.validate();
    const std::size_t channels = config.model == ModelKind::SEIZ ? 1 : kActivityCount;
    std::array<SeizParams, kActivityCount> rates{};
    if (config.model == ModelKind::SEIZ) {
        rates[0] = std::get<SeizParams>(config.true_params);
    } else {
        const auto& q = std::get<CdSeizParams>(config.true_params);
        for (std::size_t c = 0; c < kActivityCount; ++c)
            rates[c] = q.channel(c);
    }

    std::seed_seq seq{static_cast<std::uint32_t>(config.seed & 0xffffffffu),
                      static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(index & 0xffffffffu),
                      static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    SimulatedCascade out;
    out.index = index;
    out.true_params = config.true_params;

    const double n = static_cast<double>(config.n_agents);
    std::int64_t s = static_cast<std::int64_t>(config.n_agents - config.initial_infected());
    std::array<Channel, kActivityCount> ch{};

    const std::string stem = fmt::format("{}{:04d}", config.id_prefix, index);
    std::size_t seq_no = 0;
    auto emit = [&](double t_hours, std::size_t c, bool root) {
        TweetEvent ev;
        ev.id = fmt::format("{}-{:06d}", stem, seq_no);
        ev.user_id = fmt::format("{}-u{:06d}", stem, seq_no);
        ev.timestamp = config.start + std::chrono::seconds{static_cast<std::int64_t>(std::floor(t_hours * 3600.0))};
        if (root) {
            ev.action = Action::Root;
        } else {
            ev.action = channel_action(config.model, c);
            const auto parent = static_cast<std::size_t>(unit(rng) * static_cast<double>(out.events.size()));
            ev.parent_id = out.events[std::min(parent, out.events.size() - 1)].id;
        }
        ++seq_no;
        out.events.push_back(std::move(ev));
    };

    bool root_emitted = false;
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t k = 0; k < config.i0[c]; ++k) {
            emit(0.0, c, !root_emitted);
            root_emitted = true;
        }
        ch[c].i = static_cast<std::int64_t>(config.i0[c]);
    }

    const std::size_t dim = model_dimension(config.model);
    auto snapshot = [&] {
        std::vector<std::int64_t> x(dim, 0);
        x[0] = s;
        for (std::size_t c = 0; c < channels; ++c) {
            x[1 + 3 * c] = ch[c].e;
            x[2 + 3 * c] = ch[c].i;
            x[3 + 3 * c] = ch[c].z;
        }
        return x;
    };

    const auto horizon = static_cast<double>(config.horizon_hours);
    out.hourly_states.reserve(config.horizon_hours + 1);
    out.hourly_states.push_back(snapshot());
    std::size_t next_hour = 1;

    std::array<double, ReactionsPerChannel * kActivityCount> a{};
    double t = 0.0;
    while (true) {
        double a0 = 0.0;
        const double sd = static_cast<double>(s);
        for (std::size_t c = 0; c < channels; ++c) {
            const SeizParams& q = rates[c];
            const double e = static_cast<double>(ch[c].e);
            const double i = static_cast<double>(ch[c].i);
            const double z = static_cast<double>(ch[c].z);
            double* r = a.data() + ReactionsPerChannel * c;
            r[DirectInfection] = q.p * q.beta * sd * i / n;
            r[ExposureByI] = (1.0 - q.p) * q.beta * sd * i / n;
            r[Skepticism] = q.l * q.b * sd * z / n;
            r[ExposureByZ] = (1.0 - q.l) * q.b * sd * z / n;
            r[ContactAdoption] = q.rho * e * i / n;
            r[Incubation] = q.epsilon * e;
            for (std::size_t k = 0; k < ReactionsPerChannel; ++k)
                a0 += r[k];
        }
        if (!std::isfinite(a0))
            throw ConfigError("reaction propensities overflowed");
        const double t_next = a0 > 0.0 ? t - std::log1p(-unit(rng)) / a0 : horizon;
        while (next_hour <= config.horizon_hours && static_cast<double>(next_hour) <= t_next) {
            out.hourly_states.push_back(snapshot());
            ++next_hour;
        }
        if (t_next >= horizon)
            break;
        t = t_next;

        const std::size_t n_reactions = ReactionsPerChannel * channels;
        double pick = unit(rng) * a0;
        std::size_t reaction = n_reactions;
        std::size_t last_active = 0;
        for (std::size_t r = 0; r < n_reactions; ++r) {
            if (a[r] <= 0.0)
                continue;
            last_active = r;
            if (pick < a[r]) {
                reaction = r;
                break;
            }
            pick -= a[r];
        }
        if (reaction == n_reactions)
            reaction = last_active; // rounding ran past the end
        const std::size_t c = reaction / ReactionsPerChannel;
        switch (static_cast<Reaction>(reaction % ReactionsPerChannel)) {
        case DirectInfection:
            --s;
            ++ch[c].i;
            emit(t, c, false);
            break;
        case ExposureByI:
        case ExposureByZ:
            --s;
            ++ch[c].e;
            break;
        case Skepticism:
            --s;
            ++ch[c].z;
            break;
        case ContactAdoption:
        case Incubation:
            --ch[c].e;
            ++ch[c].i;
            emit(t, c, false);
            break;
        case ReactionsPerChannel:
            break;
        }
    }
    while (out.hourly_states.size() < config.horizon_hours + 1)
        out.hourly_states.push_back(snapshot());

    for (std::size_t c = 0; c < channels; ++c)
        out.total_infections += static_cast<std::size_t>(ch[c].i);
    return out;
}

std::vector<SimulatedCascade> simulate_stochastic(const SynthConfig& config)
{
    config.validate();
    std::vector<SimulatedCascade> out;
    out.reserve(config.n_cascades);
    for (std::size_t k = 0; k < config.n_cascades; ++k)
        out.push_back(simulate_cascade(config, k));
    return out;
}

ActivitySeries noiseless_series(const SynthConfig& config)
{
    config.validate();
    const double n = static_cast<double>(config.n_agents);
    ModelState x0(model_dimension(config.model), 0.0);
    x0[0] = n - static_cast<double>(config.initial_infected());
    const std::size_t channels = config.model == ModelKind::SEIZ ? 1 : kActivityCount;
    for (std::size_t c = 0; c < channels; ++c)
        x0[2 + 3 * c] = static_cast<double>(config.i0[c]);

    TimeGrid grid;
    grid.n_obs = config.horizon_hours + 1;
    const Trajectory traj = integrate(config.true_params, x0, n, grid);
    const InfectedSeries infected = infected_series(traj, config.model);

    ActivitySeries series;
    series.t0 = config.start;
    series.horizon_hours = config.horizon_hours;
    for (auto& channel : series.cumulative)
        channel.assign(grid.n_obs, 0);
    for (std::size_t c = 0; c < infected.channels.size(); ++c)
        for (std::size_t k = 0; k < grid.n_obs; ++k)
            series.cumulative[c][k] = std::llround(infected.channels[c][k]);
    series.total.assign(grid.n_obs, 0);
    for (std::size_t k = 0; k < grid.n_obs; ++k)
        series.total[k] = series.cumulative[0][k] + series.cumulative[1][k] + series.cumulative[2][k];
    return series;
}

std::string events_jsonl(const SimulatedCascade& cascade)
{
    std::string out;
    for (const auto& ev : cascade.events) {
        out += event_to_json_line(ev);
        out += '\n';
    }
    return out;
}

std::string truth_json(const SynthConfig& config, const SimulatedCascade& cascade)
{
    using ojson = nlohmann::ordered_json;
    ojson j;
    j["cascade_index"] = cascade.index;
    j["root_id"] = cascade.events.empty() ? std::string() : cascade.events.front().id;
    j["model"] = std::string(to_string(config.model));
    ojson params;
    std::visit(
        [&params](const auto& q) {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, SeizParams>) {
                params["beta"] = q.beta;
                params["b"] = q.b;
                params["rho"] = q.rho;
                params["epsilon"] = q.epsilon;
                params["p"] = q.p;
                params["l"] = q.l;
            } else if constexpr (std::is_same_v<T, CdSeizParams>) {
                params["beta"] = q.beta;
                params["b"] = q.b;
                params["rho"] = q.rho;
                params["epsilon"] = q.epsilon;
                params["p"] = q.p;
                params["l"] = q.l;
            }
        },
        cascade.true_params);
    j["true_params"] = std::move(params);
    j["n_agents"] = config.n_agents;
    j["i0"] = config.i0;
    j["horizon_hours"] = config.horizon_hours;
    j["seed"] = config.seed;
    j["total_infections"] = cascade.total_infections;
    return j.dump(2) + "\n";
}

} // namespace cascadefit
