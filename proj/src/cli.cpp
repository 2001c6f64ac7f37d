#include "cascadefit/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <openssl/evp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "cascadefit/cascade.hpp"
#include "cascadefit/errors.hpp"
#include "cascadefit/fitting.hpp"
#include "cascadefit/metrics.hpp"
#include "cascadefit/synth.hpp"
#include "json.hpp"

namespace cascadefit::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string sha256_hex(std::string_view data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    std::string hex;
    hex.reserve(2 * len);
    for (unsigned int k = 0; k < len; ++k)
        hex += fmt::format("{:02x}", digest[k]);
    return hex;
}

namespace {

class InputError : public Error {
public:
    using Error::Error;
};

class BulkFailure : public Error {
public:
    using Error::Error;
};

std::shared_ptr<spdlog::logger> logger()
{
    static const auto instance = [] {
        auto existing = spdlog::get("cascadefit");
        return existing ? existing : spdlog::stderr_color_mt("cascadefit");
    }();
    return instance;
}

void configure_logging(std::ostream& err)
{
    auto level = spdlog::level::warn;
    if (const char* env = std::getenv("CASCADEFIT_LOG"); env != nullptr && *env != '\0') {
        const auto parsed = spdlog::level::from_str(env);
        if (parsed == spdlog::level::off && std::string_view(env) != "off")
            err << fmt::format("warning: unknown CASCADEFIT_LOG level '{}', using warn\n", env);
        else
            level = parsed;
    }
    logger()->set_level(level);
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError(fmt::format("cannot read '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
        throw InputError(fmt::format("error while reading '{}'", path.string()));
    return ss.str();
}

void write_text(const fs::path& path, std::string_view text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out)
        throw InputError(fmt::format("cannot write '{}'", path.string()));
}

void ensure_directory(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw InputError(fmt::format("cannot create output directory '{}'", dir.string()));
}

// Directories expand to their files matching `accept`, sorted by name.
template <class Accept>
std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs, Accept accept)
{
    std::vector<fs::path> out;
    for (const auto& raw : inputs) {
        const fs::path p(raw);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& entry : fs::directory_iterator(p))
                if (entry.is_regular_file() && accept(entry.path().filename().string()))
                    found.push_back(entry.path());
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else if (fs::exists(p)) {
            out.push_back(p);
        } else {
            throw InputError(fmt::format("input '{}' does not exist", raw));
        }
    }
    return out;
}

std::size_t resolve_jobs(std::size_t jobs)
{
    if (jobs > 0)
        return jobs;
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Runs body(0..count-1) on up to `jobs` threads. The first failing index, in
// index order, has its exception rethrown.
template <class Body>
void parallel_for(std::size_t count, std::size_t jobs, Body&& body)
{
    std::vector<std::exception_ptr> failures(count);
    auto guarded = [&](std::size_t k) {
        try {
            body(k);
        } catch (...) {
            failures[k] = std::current_exception();
        }
    };
    jobs = std::min(jobs, count);
    if (jobs <= 1) {
        for (std::size_t k = 0; k < count; ++k)
            guarded(k);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        pool.reserve(jobs);
        for (std::size_t w = 0; w < jobs; ++w)
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < count; k = next++)
                    guarded(k);
            });
    }
    for (auto& f : failures)
        if (f)
            std::rethrow_exception(f);
}

class RunManifest {
public:
    RunManifest(std::string command, std::string effective_config, std::uint64_t seed)
        : command_(std::move(command)), config_(std::move(effective_config)), seed_(seed)
    {
    }

    void input(const fs::path& path, std::string_view contents)
    {
        inputs_.emplace_back(path.generic_string(), sha256_hex(contents));
    }

    void output(const fs::path& dir, const std::string& name, std::string_view contents)
    {
        write_text(dir / name, contents);
        outputs_.push_back(name);
    }

    template <class F>
    decltype(auto) stage(std::string name, F&& f)
    {
        const auto t0 = std::chrono::steady_clock::now();
        struct Record {
            RunManifest* self;
            std::string name;
            std::chrono::steady_clock::time_point t0;
            ~Record()
            {
                const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
                self->timings_.emplace_back(std::move(name), dt.count());
            }
        } record{this, std::move(name), t0};
        return f();
    }

    void write(const fs::path& dir) const
    {
        ojson j;
        j["tool"] = "cascadefit";
        j["version"] = std::string(kVersion);
        j["command"] = command_;
        j["seed"] = seed_;
        j["config_hash"] = sha256_hex(config_);
        j["effective_config"] = config_;
        ojson inputs = ojson::array();
        for (const auto& [path, digest] : inputs_)
            inputs.push_back(ojson{{"path", path}, {"sha256", digest}});
        j["inputs"] = std::move(inputs);
        j["outputs"] = outputs_;
        ojson timings = ojson::object();
        for (const auto& [name, seconds] : timings_)
            timings[name] = seconds;
        j["timings_seconds"] = std::move(timings);
        write_text(dir / "manifest.json", j.dump(2) + "\n");
    }

private:
    std::string command_;
    std::string config_;
    std::uint64_t seed_;
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<std::string> outputs_;
    std::vector<std::pair<std::string, double>> timings_;
};

std::string effective_config(const CLI::App& sub)
{
    return fmt::format("[{}]\n{}", sub.get_name(), sub.config_to_str(true, false));
}

ModelKind model_from_flag(const std::string& text)
{
    try {
        return parse_model_kind(text);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
}

std::string sanitize_id(std::string_view id)
{
    std::string out;
    for (char c : id) {
        const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                          c == '_' || c == '.';
        out += keep ? c : '_';
    }
    return out;
}

// Either {"beta": [lo, hi], ...} for the model at hand, or an object keyed by
// model name holding such maps.
std::optional<std::string> bounds_section(ModelKind kind, const std::string& text)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("bounds file is not valid JSON: {}", e.what()));
    }
    if (!doc.is_object())
        throw ConfigError("bounds file must hold a JSON object");
    bool keyed = false;
    for (ModelKind m : kAllModels)
        keyed = keyed || doc.contains(std::string(to_string(m)));
    if (!keyed)
        return text;
    const std::string key(to_string(kind));
    if (!doc.contains(key))
        return std::nullopt;
    return doc[key].dump();
}

// Fails early on unknown names or malformed pairs; bounds that depend on the
// target (N) are checked per cascade.
void check_bounds_names(ModelKind kind, const std::optional<std::string>& section)
{
    if (!section)
        return;
    std::vector<ParameterBounds> dummy(theta_size(kind), ParameterBounds{0.0, 1.0});
    (void)apply_bounds_overrides(kind, std::move(dummy), *section);
}

struct FitFlags {
    std::uint64_t seed = 1;
    std::size_t starts = 32;
    std::size_t max_evals = 2000;
    std::size_t restarts = 4;
    std::size_t substeps = 10;
    double rate_cap = 10.0;
    std::size_t jobs = 0;
    std::string bounds_file;

    void attach(CLI::App& app)
    {
        app.add_option("--seed", seed, "Seed for the Latin-hypercube starts")->capture_default_str();
        app.add_option("--starts", starts, "Multi-start count")->capture_default_str()->check(CLI::PositiveNumber);
        app.add_option("--max-evals", max_evals, "Objective evaluations per start")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        app.add_option("--restarts", restarts, "Simplex restarts after convergence")->capture_default_str();
        app.add_option("--substeps", substeps, "RK4 steps per hour")->capture_default_str()->check(CLI::PositiveNumber);
        app.add_option("--rate-cap", rate_cap, "Upper bound for rate parameters")->capture_default_str();
        app.add_option("--jobs", jobs, "Worker threads (0 = CPU count)")->capture_default_str();
        app.add_option("--bounds-file", bounds_file, "JSON parameter bounds overrides");
    }

    FitConfig config(ModelKind model) const
    {
        FitConfig c;
        c.model = model;
        c.n_starts = starts;
        c.max_evals = max_evals;
        c.restarts = restarts;
        c.substeps = substeps;
        c.rate_cap = rate_cap;
        c.seed = seed;
        return c;
    }
};

FitConfig with_bounds(FitConfig config, const ActivitySeries& target, const std::optional<std::string>& section)
{
    if (section)
        config.bounds = apply_bounds_overrides(config.model, default_bounds(config.model, target, config.rate_cap),
                                               *section);
    return config;
}

// ---------------------------------------------------------------------------
// build-cascades

struct BuildOptions {
    std::vector<std::string> inputs;
    std::string out = ".";
    bool bundle = false;
    std::size_t min_size = 0;
    std::optional<std::size_t> top_k;
    std::optional<std::size_t> horizon;
    bool strict = false;
};

int cmd_build(const BuildOptions& o, const CLI::App& sub, std::ostream& out, std::ostream& err)
{
    RunManifest manifest("build-cascades", effective_config(sub), 0);
    const fs::path out_dir(o.out);

    struct Malformed {
        std::string file;
        MalformedLine line;
    };
    std::vector<TweetEvent> events;
    std::vector<Malformed> malformed;
    const auto files = expand_inputs(o.inputs, [](const std::string& name) { return name.ends_with(".jsonl"); });

    const bool parsed = manifest.stage("parse", [&] {
        std::set<std::string> seen;
        for (const auto& file : files) {
            const std::string text = read_text(file);
            manifest.input(file, text);
            std::istringstream in(text);
            ParseResult r;
            try {
                r = parse_events(in, ParseOptions{o.strict});
            } catch (const ParseError& e) {
                err << fmt::format("error: {}: {}\n", file.string(), e.what());
                return false;
            }
            for (auto& m : r.malformed)
                malformed.push_back({file.generic_string(), std::move(m)});
            for (auto& ev : r.events) {
                if (!seen.insert(ev.id).second)
                    throw DuplicateIdError(ev.id);
                events.push_back(std::move(ev));
            }
        }
        return true;
    });
    if (!parsed)
        return kExitStrictParse;
    for (const auto& m : malformed)
        err << fmt::format("warning: {}:{}: skipped malformed line: {}\n", m.file, m.line.line, m.line.reason);

    ensure_directory(out_dir);
    const BuildResult built = manifest.stage("build", [&] { return build_cascades(events); });
    const std::size_t n_roots = built.trees.size();
    std::vector<CascadeTree> selected = select_cascades(built.trees, o.min_size, o.top_k);

    std::vector<CascadeFile> cascades;
    std::map<std::string, std::vector<std::string>> truncated;
    manifest.stage("bin", [&] {
        for (auto& tree : selected) {
            BinningResult b = binned_series(tree, o.horizon);
            if (!b.truncated.empty())
                truncated[tree.root_id()] = std::move(b.truncated);
            cascades.push_back(CascadeFile{std::move(tree), std::move(b.series)});
        }
    });

    if (events.empty())
        err << "warning: input holds no events; no cascade files written\n";
    if (!built.orphans.empty())
        err << fmt::format("warning: {} events do not descend from a root in the input\n", built.orphans.size());

    std::vector<std::string> written;
    manifest.stage("write", [&] {
        if (o.bundle) {
            if (!cascades.empty()) {
                manifest.output(out_dir, "cascades.json", write_cascade_bundle(cascades));
                written.emplace_back("cascades.json");
            }
            return;
        }
        std::set<std::string> used;
        for (const auto& c : cascades) {
            std::string name = fmt::format("cascade_{}.json", sanitize_id(c.tree.root_id()));
            for (std::size_t k = 2; used.contains(name); ++k)
                name = fmt::format("cascade_{}-{}.json", sanitize_id(c.tree.root_id()), k);
            used.insert(name);
            manifest.output(out_dir, name, write_cascade_file(c.tree, c.series));
            written.push_back(name);
        }
    });

    ojson report;
    report["events"] = events.size();
    report["roots"] = n_roots;
    report["selected"] = cascades.size();
    report["orphans"] = built.orphans;
    ojson bad = ojson::array();
    for (const auto& m : malformed)
        bad.push_back(ojson{{"file", m.file}, {"line", m.line.line}, {"reason", m.line.reason}});
    report["malformed"] = std::move(bad);
    ojson trunc = ojson::object();
    for (const auto& [root, ids] : truncated)
        trunc[root] = ids;
    report["truncated"] = std::move(trunc);
    report["files"] = written;
    manifest.output(out_dir, "build_report.json", report.dump(2) + "\n");
    manifest.write(out_dir);

    out << fmt::format("roots={} events={} orphans={} malformed={} cascades_written={}\n", n_roots, events.size(),
                       built.orphans.size(), malformed.size(), cascades.size());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// fit

struct FitOptions {
    std::string cascade;
    std::string model;
    std::string out = ".";
    std::string root_id;
    FitFlags flags;
};

int cmd_fit(const FitOptions& o, const CLI::App& sub, std::ostream& out, std::ostream& err)
{
    RunManifest manifest("fit", effective_config(sub), o.flags.seed);
    const ModelKind model = model_from_flag(o.model);
    const fs::path out_dir(o.out);

    const std::string text = read_text(o.cascade);
    manifest.input(o.cascade, text);
    std::vector<CascadeFile> files;
    try {
        files = read_cascade_files(text);
    } catch (const std::exception& e) {
        throw InputError(fmt::format("{}: {}", o.cascade, e.what()));
    }
    const CascadeFile* chosen = nullptr;
    if (!o.root_id.empty()) {
        for (const auto& f : files)
            if (f.tree.root_id() == o.root_id)
                chosen = &f;
        if (chosen == nullptr)
            throw InputError(fmt::format("cascade '{}' not found in {}", o.root_id, o.cascade));
    } else if (files.size() == 1) {
        chosen = &files.front();
    } else {
        throw InputError(fmt::format("{} holds {} cascades; pick one with --root-id", o.cascade, files.size()));
    }

    std::optional<std::string> section;
    if (!o.flags.bounds_file.empty()) {
        const std::string bounds_text = read_text(o.flags.bounds_file);
        manifest.input(o.flags.bounds_file, bounds_text);
        section = bounds_section(model, bounds_text);
    }
    FitConfig config = with_bounds(o.flags.config(model), chosen->series, section);
    config.jobs = resolve_jobs(o.flags.jobs);

    FitResult result;
    try {
        result = manifest.stage("fit", [&] { return fit(chosen->series, config); });
    } catch (const FitFailedError& e) {
        err << fmt::format("error: cascade {}: {}\n", chosen->tree.root_id(), e.what());
        return kExitFitFailed;
    } catch (const std::invalid_argument& e) {
        throw InputError(fmt::format("cascade {}: {}", chosen->tree.root_id(), e.what()));
    }

    ensure_directory(out_dir);
    const std::string stem = fmt::format("fit_{}", to_string(model));
    manifest.output(out_dir, stem + ".json", fit_result_json(result));
    manifest.output(out_dir, stem + "_curve.csv", fit_curve_csv(result, chosen->series));
    manifest.write(out_dir);

    out << fmt::format("cascade={} model={} error={:.6g} mean_deviation={:.6g} evals={}\n", chosen->tree.root_id(),
                       to_string(model), result.error, result.mean_deviation, result.n_evals);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// compare

struct CompareOptions {
    std::vector<std::string> inputs;
    std::string out = ".";
    FitFlags flags;
};

std::string format_optional(const std::optional<double>& v)
{
    return v ? fmt::format("{:.6g}", *v) : std::string("na");
}

int cmd_compare(const CompareOptions& o, const CLI::App& sub, std::ostream& out, std::ostream& err)
{
    RunManifest manifest("compare", effective_config(sub), o.flags.seed);
    const fs::path out_dir(o.out);

    std::array<std::optional<std::string>, 3> sections;
    if (!o.flags.bounds_file.empty()) {
        const std::string bounds_text = read_text(o.flags.bounds_file);
        manifest.input(o.flags.bounds_file, bounds_text);
        for (ModelKind m : kAllModels) {
            sections[model_slot(m)] = bounds_section(m, bounds_text);
            check_bounds_names(m, sections[model_slot(m)]);
        }
    }

    std::vector<CascadeFile> cascades;
    manifest.stage("load", [&] {
        const auto files = expand_inputs(o.inputs, [](const std::string& name) {
            return name.starts_with("cascade") && name.ends_with(".json");
        });
        std::set<std::string> seen;
        for (const auto& file : files) {
            const std::string text = read_text(file);
            manifest.input(file, text);
            std::vector<CascadeFile> loaded;
            try {
                loaded = read_cascade_files(text);
            } catch (const std::exception& e) {
                throw InputError(fmt::format("{}: {}", file.string(), e.what()));
            }
            for (auto& c : loaded) {
                if (!seen.insert(c.tree.root_id()).second)
                    throw InputError(fmt::format("cascade '{}' appears more than once", c.tree.root_id()));
                cascades.push_back(std::move(c));
            }
        }
    });
    if (cascades.empty())
        throw InputError("no cascade files found in the input");
    std::sort(cascades.begin(), cascades.end(),
              [](const CascadeFile& a, const CascadeFile& b) { return a.tree.root_id() < b.tree.root_id(); });

    std::vector<ComparisonRow> rows(cascades.size());
    std::vector<std::array<std::optional<FitResult>, 3>> fits(cascades.size());
    manifest.stage("fit", [&] {
        parallel_for(cascades.size(), resolve_jobs(o.flags.jobs), [&](std::size_t k) {
            const CascadeFile& c = cascades[k];
            ComparisonRow& row = rows[k];
            row.cascade_id = c.tree.root_id();
            row.size = c.tree.size();
            for (ModelKind m : kAllModels) {
                const std::size_t slot = model_slot(m);
                try {
                    FitConfig config = with_bounds(o.flags.config(m), c.series, sections[slot]);
                    FitResult r = fit(c.series, config);
                    row.error[slot] = r.error;
                    row.mean_deviation[slot] = r.mean_deviation;
                    fits[k][slot] = std::move(r);
                } catch (const Error& e) {
                    row.failure[slot] = e.what();
                } catch (const std::invalid_argument& e) {
                    row.failure[slot] = e.what();
                }
                if (!row.failure[slot].empty())
                    logger()->warn("cascade {} {}: {}", row.cascade_id, to_string(m), row.failure[slot]);
                else
                    logger()->debug("cascade {} {}: error {}", row.cascade_id, to_string(m), *row.error[slot]);
            }
        });
    });

    const ComparisonReport report = manifest.stage("report", [&] { return build_comparison_report(rows); });
    ensure_directory(out_dir);
    manifest.stage("write", [&] {
        manifest.output(out_dir, "comparison.csv", comparison_csv(report));
        manifest.output(out_dir, "summary.json", summary_json(report));
        const auto bins = error_histogram(report);
        manifest.output(out_dir, "histogram.csv", histogram_csv(bins));
        std::string fit_rows = fit_result_csv_header();
        for (std::size_t k = 0; k < cascades.size(); ++k)
            for (const auto& r : fits[k])
                if (r)
                    fit_rows += fit_result_csv_row(cascades[k].tree.root_id(), *r);
        manifest.output(out_dir, "fits.csv", fit_rows);
    });
    manifest.write(out_dir);

    std::size_t failed = 0;
    for (const auto& row : report.rows)
        failed += std::any_of(row.failure.begin(), row.failure.end(), [](const auto& f) { return !f.empty(); });
    std::string p_text = "na";
    for (const auto& t : report.tests)
        if (!t.extension)
            p_text = t.result ? fmt::format("{:.4g}", t.result->p_two_sided) : t.status;
    out << fmt::format("cascades={} failed={} median_error sis={} seiz={} cdseiz={} p_seiz_cdseiz={}\n",
                       report.rows.size(), failed, format_optional(report.summary[0].median_error),
                       format_optional(report.summary[1].median_error),
                       format_optional(report.summary[2].median_error), p_text);
    if (2 * failed >= report.rows.size() && failed > 0) {
        err << fmt::format("error: {} of {} cascades had a failed fit\n", failed, report.rows.size());
        return kExitBulkFailure;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
    std::string model = "seiz";
    std::size_t n = 1;
    std::uint64_t seed = 1;
    std::size_t n_agents = 20000;
    std::vector<std::size_t> i0;
    std::size_t horizon = 48;
    std::optional<double> beta, b, rho, epsilon;
    std::vector<double> p, l;
    std::string start = "2018-04-01T00:00:00Z";
    std::string prefix = "syn";
    std::string out = ".";
    std::size_t jobs = 0;
};

template <std::size_t K>
std::array<double, K> channel_values(const std::vector<double>& given, std::array<double, K> fallback,
                                     std::string_view name)
{
    if (given.empty())
        return fallback;
    if (given.size() != K)
        throw ConfigError(fmt::format("--{} takes {} value(s), got {}", name, K, given.size()));
    std::array<double, K> out{};
    std::copy(given.begin(), given.end(), out.begin());
    return out;
}

SynthConfig synth_config(const SynthOptions& o)
{
    SynthConfig c;
    c.model = model_from_flag(o.model);
    c.n_agents = o.n_agents;
    c.horizon_hours = o.horizon;
    c.seed = o.seed;
    c.n_cascades = o.n;
    c.id_prefix = o.prefix;
    try {
        c.start = parse_timestamp(o.start);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(fmt::format("--start: {}", e.what()));
    }

    if (c.model == ModelKind::SEIZ) {
        SeizParams q{.beta = o.beta.value_or(0.8),
                     .b = o.b.value_or(0.3),
                     .rho = o.rho.value_or(0.2),
                     .epsilon = o.epsilon.value_or(0.15),
                     .p = channel_values<1>(o.p, {0.3}, "p")[0],
                     .l = channel_values<1>(o.l, {0.5}, "l")[0]};
        c.true_params = q;
        if (o.i0.size() > 1)
            throw ConfigError("--i0 takes one value for seiz");
        c.i0 = {o.i0.empty() ? 5 : o.i0[0], 0, 0};
    } else if (c.model == ModelKind::CDSEIZ) {
        CdSeizParams q;
        q.beta = o.beta.value_or(0.8);
        q.b = o.b.value_or(0.3);
        q.rho = o.rho.value_or(0.2);
        q.epsilon = o.epsilon.value_or(0.1);
        q.p = channel_values<3>(o.p, {0.9, 0.3, 0.1}, "p");
        q.l = channel_values<3>(o.l, {0.2, 0.5, 0.8}, "l");
        c.true_params = q;
        if (o.i0.empty())
            c.i0 = {5, 5, 5};
        else if (o.i0.size() == 3)
            std::copy(o.i0.begin(), o.i0.end(), c.i0.begin());
        else
            throw ConfigError("--i0 takes three values for cdseiz");
    } else {
        throw ConfigError("synth supports --model seiz or cdseiz");
    }
    c.validate();
    return c;
}

int cmd_synth(const SynthOptions& o, const CLI::App& sub, std::ostream& out, std::ostream&)
{
    RunManifest manifest("synth", effective_config(sub), o.seed);
    const SynthConfig config = synth_config(o);
    const fs::path out_dir(o.out);

    std::vector<SimulatedCascade> sims(config.n_cascades);
    manifest.stage("simulate", [&] {
        parallel_for(sims.size(), resolve_jobs(o.jobs),
                     [&](std::size_t k) { sims[k] = simulate_cascade(config, k); });
    });

    ensure_directory(out_dir);
    std::size_t n_events = 0;
    manifest.stage("write", [&] {
        for (const auto& s : sims) {
            const std::string stem = fmt::format("synth_{:04d}", s.index);
            manifest.output(out_dir, stem + ".jsonl", events_jsonl(s));
            manifest.output(out_dir, stem + ".truth.json", truth_json(config, s));
            n_events += s.events.size();
        }
    });
    manifest.write(out_dir);
    out << fmt::format("model={} cascades={} events={} seed={}\n", to_string(config.model), sims.size(), n_events,
                       config.seed);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportOptions {
    std::string input;
    std::string out = ".";
};

int cmd_report(const ReportOptions& o, const CLI::App& sub, std::ostream& out, std::ostream&)
{
    RunManifest manifest("report", effective_config(sub), 0);
    const std::string text = read_text(o.input);
    manifest.input(o.input, text);
    std::vector<ComparisonRow> rows;
    try {
        rows = parse_comparison_csv(text);
    } catch (const std::exception& e) {
        throw InputError(fmt::format("{}: {}", o.input, e.what()));
    }
    if (rows.empty())
        throw InputError(fmt::format("{} holds no rows", o.input));
    const ComparisonReport report = build_comparison_report(std::move(rows));

    const fs::path out_dir(o.out);
    ensure_directory(out_dir);
    manifest.output(out_dir, "summary.json", summary_json(report));
    const auto bins = error_histogram(report);
    manifest.output(out_dir, "histogram.csv", histogram_csv(bins));
    manifest.write(out_dir);
    out << fmt::format("rows={} median_error sis={} seiz={} cdseiz={}\n", report.rows.size(),
                       format_optional(report.summary[0].median_error),
                       format_optional(report.summary[1].median_error),
                       format_optional(report.summary[2].median_error));
    return kExitOk;
}

} // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err)
{
    configure_logging(err);

    CLI::App app{"Cascade reconstruction and compartmental model fitting", "cascadefit"};
    app.set_version_flag("--version", std::string(kVersion));
    app.set_config("--config", "", "TOML/INI file with one [subcommand] section");
    app.require_subcommand(1);
    app.fallthrough();

    BuildOptions build;
    auto* build_cmd = app.add_subcommand("build-cascades", "Reconstruct cascades from JSONL event logs");
    build_cmd->add_option("--input", build.inputs, "Event log files or directories of *.jsonl")->required();
    build_cmd->add_option("--out", build.out, "Output directory")->capture_default_str();
    build_cmd->add_flag("--bundle", build.bundle, "Write one cascades.json instead of one file per root");
    build_cmd->add_option("--min-size", build.min_size, "Drop cascades with fewer reactions")->capture_default_str();
    build_cmd->add_option("--top-k", build.top_k, "Keep the k largest cascades");
    build_cmd->add_option("--horizon", build.horizon, "Series horizon in hours (default: last event)");
    build_cmd->add_flag("--strict", build.strict, "Fail on the first malformed line");

    FitOptions fit_opts;
    auto* fit_cmd = app.add_subcommand("fit", "Fit one model to one cascade");
    fit_cmd->add_option("--cascade", fit_opts.cascade, "Cascade file")->required();
    fit_cmd->add_option("--model", fit_opts.model, "sis, seiz or cdseiz")->required();
    fit_cmd->add_option("--out", fit_opts.out, "Output directory")->capture_default_str();
    fit_cmd->add_option("--root-id", fit_opts.root_id, "Cascade to pick from a bundle");
    fit_opts.flags.attach(*fit_cmd);

    CompareOptions compare;
    auto* compare_cmd = app.add_subcommand("compare", "Fit all models to every cascade and compare errors");
    compare_cmd->add_option("--input", compare.inputs, "Cascade files or directories")->required();
    compare_cmd->add_option("--out", compare.out, "Output directory")->capture_default_str();
    compare.flags.attach(*compare_cmd);

    SynthOptions synth;
    auto* synth_cmd = app.add_subcommand("synth", "Simulate cascades with known parameters");
    synth_cmd->add_option("--model", synth.model, "seiz or cdseiz")->capture_default_str();
    synth_cmd->add_option("--n", synth.n, "Number of cascades")->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed, "Master seed")->capture_default_str();
    synth_cmd->add_option("--n-agents", synth.n_agents, "Population size")->capture_default_str();
    synth_cmd->add_option("--i0", synth.i0, "Initially infected agents per channel");
    synth_cmd->add_option("--horizon", synth.horizon, "Hours to simulate (>= 8)")->capture_default_str();
    synth_cmd->add_option("--beta", synth.beta);
    synth_cmd->add_option("--b", synth.b);
    synth_cmd->add_option("--rho", synth.rho);
    synth_cmd->add_option("--epsilon", synth.epsilon);
    synth_cmd->add_option("--p", synth.p, "Direct-adoption probability per channel");
    synth_cmd->add_option("--l", synth.l, "Skeptic probability per channel");
    synth_cmd->add_option("--start", synth.start, "Root timestamp")->capture_default_str();
    synth_cmd->add_option("--prefix", synth.prefix, "Event id prefix")->capture_default_str();
    synth_cmd->add_option("--out", synth.out, "Output directory")->capture_default_str();
    synth_cmd->add_option("--jobs", synth.jobs, "Worker threads (0 = CPU count)")->capture_default_str();

    ReportOptions report;
    auto* report_cmd = app.add_subcommand("report", "Rebuild summary and histogram from comparison.csv");
    report_cmd->add_option("--input", report.input, "comparison.csv")->required();
    report_cmd->add_option("--out", report.out, "Output directory")->capture_default_str();

    std::vector<const char*> argv{"cascadefit"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (build_cmd->parsed())
            return cmd_build(build, *build_cmd, out, err);
        if (fit_cmd->parsed())
            return cmd_fit(fit_opts, *fit_cmd, out, err);
        if (compare_cmd->parsed())
            return cmd_compare(compare, *compare_cmd, out, err);
        if (synth_cmd->parsed())
            return cmd_synth(synth, *synth_cmd, out, err);
        return cmd_report(report, *report_cmd, out, err);
    } catch (const FitFailedError& e) {
        err << "error: " << e.what() << '\n';
        return kExitFitFailed;
    } catch (const ClockSkewError& e) {
        err << "error: " << e.what() << '\n';
        for (const auto& id : e.offenders())
            err << "  " << id << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }
}

} // namespace cascadefit::cli
