#include "cascadefit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "cascadefit/errors.hpp"
#include "json.hpp"

namespace cascadefit {

double fit_error(std::span<const double> model, std::span<const double> target)
{
    if (model.size() != target.size())
        throw std::invalid_argument(
            fmt::format("series lengths differ ({} vs {})", model.size(), target.size()));
    if (target.empty())
        throw std::invalid_argument("series must not be empty");
    double residual = 0.0;
    double norm = 0.0;
    for (std::size_t k = 0; k < target.size(); ++k) {
        const double r = model[k] - target[k];
        residual += r * r;
        norm += target[k] * target[k];
    }
    if (!(norm > 0.0))
        throw DegenerateTargetError("target series has zero norm");
    return std::sqrt(residual) / std::sqrt(norm);
}

double mean_deviation(std::span<const double> model, std::span<const double> target)
{
    if (model.size() != target.size())
        throw std::invalid_argument(
            fmt::format("series lengths differ ({} vs {})", model.size(), target.size()));
    if (target.empty())
        throw std::invalid_argument("series must not be empty");
    double sum = 0.0;
    for (std::size_t k = 0; k < target.size(); ++k)
        sum += std::abs(model[k] - target[k]);
    return sum / static_cast<double>(target.size());
}

namespace {

struct RankedPool {
    // Doubled mid-ranks, aligned with the input order (a first, then b).
    std::vector<long long> doubled_rank;
    double tie_term = 0.0; // sum over tie groups of t^3 - t
};

RankedPool rank_pool(std::span<const double> a, std::span<const double> b)
{
    const std::size_t n = a.size() + b.size();
    std::vector<double> values;
    values.reserve(n);
    values.insert(values.end(), a.begin(), a.end());
    values.insert(values.end(), b.begin(), b.end());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });

    RankedPool pool;
    pool.doubled_rank.assign(n, 0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && values[order[j]] == values[order[i]])
            ++j;
        // Positions i..j-1 share ranks i+1..j; their mean doubled is i+j+1.
        for (std::size_t k = i; k < j; ++k)
            pool.doubled_rank[order[k]] = static_cast<long long>(i + j + 1);
        const double t = static_cast<double>(j - i);
        pool.tie_term += t * t * t - t;
        i = j;
    }
    return pool;
}

// Exact null distribution of 2*U for the sample occupying `m` of the pooled
// doubled ranks. Returns a map 2U -> probability.
std::map<long long, double> exact_u_distribution(const std::vector<long long>& doubled_rank, std::size_t m)
{
    const std::size_t n = doubled_rank.size();
    long long max_sum = 0;
    {
        std::vector<long long> sorted = doubled_rank;
        std::sort(sorted.rbegin(), sorted.rend());
        for (std::size_t k = 0; k < m; ++k)
            max_sum += sorted[k];
    }
    const auto width = static_cast<std::size_t>(max_sum + 1);
    // ways[c * width + s]: number of c-subsets of the ranks seen so far with doubled sum s.
    std::vector<double> ways((m + 1) * width, 0.0);
    ways[0] = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto r = static_cast<std::size_t>(doubled_rank[k]);
        for (std::size_t c = std::min(m, k + 1); c >= 1; --c) {
            double* dst = ways.data() + c * width;
            const double* src = ways.data() + (c - 1) * width;
            for (std::size_t s = width; s-- > r;)
                dst[s] += src[s - r];
        }
    }
    double total = 0.0;
    const double* row = ways.data() + m * width;
    for (std::size_t s = 0; s < width; ++s)
        total += row[s];
    const auto offset = static_cast<long long>(m * (m + 1));
    std::map<long long, double> dist;
    for (std::size_t s = 0; s < width; ++s) {
        if (row[s] > 0.0)
            dist[static_cast<long long>(s) - offset] = row[s] / total;
    }
    return dist;
}

double normal_two_sided(double z)
{
    return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
}

} // namespace

MannWhitneyResult mann_whitney_u(std::span<const double> sample_a, std::span<const double> sample_b)
{
    if (sample_a.empty() || sample_b.empty())
        throw std::invalid_argument("Mann-Whitney U needs two non-empty samples");
    for (double v : sample_a)
        if (!std::isfinite(v))
            throw std::invalid_argument("Mann-Whitney U samples must be finite");
    for (double v : sample_b)
        if (!std::isfinite(v))
            throw std::invalid_argument("Mann-Whitney U samples must be finite");

    const std::size_t na = sample_a.size();
    const std::size_t nb = sample_b.size();
    const double n = static_cast<double>(na + nb);
    const RankedPool pool = rank_pool(sample_a, sample_b);
    if (pool.tie_term == n * n * n - n)
        throw DegenerateTestError("all observations are identical; the rank test has zero variance");

    long long doubled_ra = 0;
    for (std::size_t k = 0; k < na; ++k)
        doubled_ra += pool.doubled_rank[k];
    const long long doubled_u = doubled_ra - static_cast<long long>(na * (na + 1));
    const long long doubled_product = static_cast<long long>(2 * na * nb);

    MannWhitneyResult result;
    result.u = static_cast<double>(doubled_u) / 2.0;

    const double fa = static_cast<double>(na);
    const double fb = static_cast<double>(nb);
    const double mean = fa * fb / 2.0;
    const double variance = fa * fb / 12.0 * ((n + 1.0) - pool.tie_term / (n * (n - 1.0)));
    const double sd = std::sqrt(std::max(variance, 0.0));
    const double diff = result.u - mean;
    const double corrected = std::max(std::abs(diff) - 0.5, 0.0);
    result.z = sd > 0.0 ? std::copysign(corrected / sd, diff) : 0.0;

    if (std::min(na, nb) <= kExactMannWhitneyLimit) {
        result.exact = true;
        // Enumerate the smaller sample; U_b = n_a*n_b - U_a.
        double lower = 0.0;
        double upper = 0.0;
        if (na <= nb) {
            for (const auto& [u2, prob] : exact_u_distribution(pool.doubled_rank, na)) {
                if (u2 <= doubled_u)
                    lower += prob;
                if (u2 >= doubled_u)
                    upper += prob;
            }
        } else {
            for (const auto& [ub2, prob] : exact_u_distribution(pool.doubled_rank, nb)) {
                const long long ua2 = doubled_product - ub2;
                if (ua2 <= doubled_u)
                    lower += prob;
                if (ua2 >= doubled_u)
                    upper += prob;
            }
        }
        result.p_two_sided = std::min(1.0, 2.0 * std::min(lower, upper));
    } else {
        result.p_two_sided = normal_two_sided(result.z);
    }
    return result;
}

// ---------------------------------------------------------------------------

std::size_t model_slot(ModelKind kind) noexcept
{
    switch (kind) {
    case ModelKind::SIS:
        return 0;
    case ModelKind::SEIZ:
        return 1;
    case ModelKind::CDSEIZ:
        break;
    }
    return 2;
}

namespace {

std::optional<double> median_of(std::vector<double> v)
{
    if (v.empty())
        return std::nullopt;
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

std::vector<double> model_errors(const std::vector<ComparisonRow>& rows, ModelKind kind)
{
    std::vector<double> out;
    for (const auto& row : rows)
        if (const auto& e = row.error[model_slot(kind)])
            out.push_back(*e);
    return out;
}

PairwiseTest run_test(const std::vector<ComparisonRow>& rows, ModelKind first, ModelKind second, bool extension)
{
    PairwiseTest test;
    test.first = first;
    test.second = second;
    test.extension = extension;
    const auto a = model_errors(rows, first);
    const auto b = model_errors(rows, second);
    if (a.size() < 2 || b.size() < 2) {
        test.status = "insufficient sample";
        return test;
    }
    try {
        test.result = mann_whitney_u(a, b);
        test.status = "ok";
    } catch (const DegenerateTestError&) {
        test.status = "degenerate";
    }
    return test;
}

std::string format_optional(const std::optional<double>& v)
{
    return v ? fmt::format("{}", *v) : std::string();
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::string> split_csv_line(std::string_view line)
{
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"') {
                if (k + 1 < line.size() && line[k + 1] == '"') {
                    fields.back() += '"';
                    ++k;
                } else {
                    quoted = false;
                }
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    return fields;
}

std::optional<double> parse_optional(const std::string& field)
{
    if (field.empty())
        return std::nullopt;
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size())
        throw std::invalid_argument(fmt::format("malformed number '{}'", field));
    return v;
}

constexpr std::string_view kCsvHeader =
    "cascade_id,size,error_sis,error_seiz,error_cdseiz,md_sis,md_seiz,md_cdseiz,"
    "failure_sis,failure_seiz,failure_cdseiz";

} // namespace

ComparisonReport build_comparison_report(std::vector<ComparisonRow> rows)
{
    if (rows.empty())
        throw std::invalid_argument("comparison report needs at least one row");
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ComparisonRow& a, const ComparisonRow& b) { return a.cascade_id < b.cascade_id; });
    ComparisonReport report;
    report.rows = std::move(rows);
    for (ModelKind kind : kAllModels) {
        const std::size_t slot = model_slot(kind);
        ModelSummary& s = report.summary[slot];
        s.model = kind;
        std::vector<double> errors;
        std::vector<double> deviations;
        for (const auto& row : report.rows) {
            if (row.error[slot]) {
                errors.push_back(*row.error[slot]);
                if (row.mean_deviation[slot])
                    deviations.push_back(*row.mean_deviation[slot]);
            } else {
                ++s.n_failed;
            }
        }
        s.n_ok = errors.size();
        s.median_error = median_of(errors);
        if (!errors.empty())
            s.mean_error = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
        s.median_mean_deviation = median_of(deviations);
    }
    report.tests.push_back(run_test(report.rows, ModelKind::SEIZ, ModelKind::CDSEIZ, false));
    report.tests.push_back(run_test(report.rows, ModelKind::SIS, ModelKind::SEIZ, true));
    report.tests.push_back(run_test(report.rows, ModelKind::SIS, ModelKind::CDSEIZ, true));
    return report;
}

std::string comparison_csv(const ComparisonReport& report)
{
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& row : report.rows) {
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", csv_field(row.cascade_id), row.size,
                           format_optional(row.error[0]), format_optional(row.error[1]),
                           format_optional(row.error[2]), format_optional(row.mean_deviation[0]),
                           format_optional(row.mean_deviation[1]), format_optional(row.mean_deviation[2]),
                           csv_field(row.failure[0]), csv_field(row.failure[1]), csv_field(row.failure[2]));
    }
    return out;
}

std::vector<ComparisonRow> parse_comparison_csv(std::string_view text)
{
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader)
        throw std::invalid_argument("comparison CSV header not recognised");
    std::vector<ComparisonRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        const auto f = split_csv_line(line);
        if (f.size() != 11)
            throw ParseError(line_no, fmt::format("expected 11 fields, found {}", f.size()));
        ComparisonRow row;
        try {
            row.cascade_id = f[0];
            row.size = static_cast<std::size_t>(std::stoull(f[1]));
            for (std::size_t m = 0; m < 3; ++m) {
                row.error[m] = parse_optional(f[2 + m]);
                row.mean_deviation[m] = parse_optional(f[5 + m]);
                row.failure[m] = f[8 + m];
            }
        } catch (const std::exception& e) {
            throw ParseError(line_no, e.what());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string summary_json(const ComparisonReport& report)
{
    using ojson = nlohmann::ordered_json;
    auto optional_json = [](const std::optional<double>& v) -> ojson { return v ? ojson(*v) : ojson(nullptr); };

    ojson j;
    j["n_cascades"] = report.rows.size();
    ojson models = ojson::object();
    for (const auto& s : report.summary) {
        ojson m;
        m["n_ok"] = s.n_ok;
        m["n_failed"] = s.n_failed;
        m["median_error"] = optional_json(s.median_error);
        m["mean_error"] = optional_json(s.mean_error);
        m["median_mean_deviation"] = optional_json(s.median_mean_deviation);
        models[std::string(to_string(s.model))] = std::move(m);
    }
    j["models"] = std::move(models);
    ojson tests = ojson::array();
    for (const auto& t : report.tests) {
        ojson e;
        e["label"] = fmt::format("{}_vs_{}", to_string(t.first), to_string(t.second));
        e["extension"] = t.extension;
        e["status"] = t.status;
        if (t.result) {
            e["u"] = t.result->u;
            e["z"] = t.result->z;
            e["p_two_sided"] = t.result->p_two_sided;
            e["exact"] = t.result->exact;
        }
        tests.push_back(std::move(e));
    }
    j["tests"] = std::move(tests);
    j["test_notes"] = "Mann-Whitney U on per-model error samples; two-sided, mid-ranks for ties, normal "
                      "approximation with tie and 0.5 continuity correction (exact enumeration when the smaller "
                      "sample has at most 8 values).";
    std::array<std::size_t, 3> overflow{};
    for (const auto& row : report.rows)
        for (std::size_t m = 0; m < 3; ++m)
            if (row.error[m] && *row.error[m] > kHistogramUpper)
                ++overflow[m];
    ojson hist;
    hist["bin_width"] = kHistogramBinWidth;
    hist["upper"] = kHistogramUpper;
    ojson over;
    for (ModelKind kind : kAllModels)
        over[std::string(to_string(kind))] = overflow[model_slot(kind)];
    hist["above_upper"] = std::move(over);
    j["histogram"] = std::move(hist);
    return j.dump(2) + "\n";
}

std::vector<HistogramBin> error_histogram(const ComparisonReport& report, double bin_width, double upper)
{
    if (!(bin_width > 0.0) || !(upper > 0.0))
        throw std::invalid_argument("histogram bin width and upper bound must be positive");
    const auto nbins = static_cast<std::size_t>(std::llround(upper / bin_width));
    std::vector<HistogramBin> bins(nbins);
    for (std::size_t k = 0; k < nbins; ++k) {
        bins[k].lo = static_cast<double>(k) * bin_width;
        bins[k].hi = static_cast<double>(k + 1) * bin_width;
    }
    for (const auto& row : report.rows) {
        for (std::size_t m = 0; m < 3; ++m) {
            if (!row.error[m] || *row.error[m] > upper)
                continue;
            auto k = static_cast<std::size_t>(std::floor(*row.error[m] / bin_width));
            k = std::min(k, nbins - 1);
            ++bins[k].counts[m];
        }
    }
    return bins;
}

std::string histogram_csv(std::span<const HistogramBin> bins)
{
    std::string out = "bin_lo,bin_hi,count_sis,count_seiz,count_cdseiz\n";
    for (const auto& b : bins)
        out += fmt::format("{},{},{},{},{}\n", b.lo, b.hi, b.counts[0], b.counts[1], b.counts[2]);
    return out;
}

} // namespace cascadefit
