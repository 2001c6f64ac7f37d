#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cascadefit/models.hpp"

namespace cascadefit {

// ||model - target||_2 / ||target||_2. Throws DegenerateTargetError on a
// zero-norm target and std::invalid_argument on a length mismatch.
double fit_error(std::span<const double> model, std::span<const double> target);

// Mean absolute pointwise deviation.
double mean_deviation(std::span<const double> model, std::span<const double> target);

struct MannWhitneyResult {
    double u = 0.0;           // U of sample a: pairs (x in a, y in b) with x > y, ties counted 1/2
    double z = 0.0;           // tie- and continuity-corrected normal score, signed like U - mean
    double p_two_sided = 1.0; // exact when `exact`, normal approximation otherwise
    bool exact = false;
};

// Samples with min(n_a, n_b) at or below this use the exact null distribution.
inline constexpr std::size_t kExactMannWhitneyLimit = 8;

// Two-sided Mann-Whitney U test with mid-ranks for ties. The exact path counts
// every assignment of the pooled (tied) ranks to sample a; the two-sided
// p-value is min(1, 2 * min(P(U <= u), P(U >= u))).
// Throws DegenerateTestError when all pooled values are equal.
MannWhitneyResult mann_whitney_u(std::span<const double> sample_a, std::span<const double> sample_b);

// ---------------------------------------------------------------------------
// Model comparison report

inline constexpr std::array<ModelKind, 3> kAllModels{ModelKind::SIS, ModelKind::SEIZ, ModelKind::CDSEIZ};

std::size_t model_slot(ModelKind kind) noexcept;

struct ComparisonRow {
    std::string cascade_id;
    std::size_t size = 0;
    // Indexed by model_slot(); unset when that fit failed.
    std::array<std::optional<double>, 3> error;
    std::array<std::optional<double>, 3> mean_deviation;
    std::array<std::string, 3> failure;

    bool operator==(const ComparisonRow&) const = default;
};

struct ModelSummary {
    ModelKind model = ModelKind::SIS;
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
    std::optional<double> median_error;
    std::optional<double> mean_error;
    std::optional<double> median_mean_deviation;
};

struct PairwiseTest {
    ModelKind first = ModelKind::SEIZ;
    ModelKind second = ModelKind::CDSEIZ;
    bool extension = false; // beyond the headline SEIZ vs CD-SEIZ test
    std::string status;     // "ok", "insufficient sample" or "degenerate"
    std::optional<MannWhitneyResult> result;
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows;
    std::array<ModelSummary, 3> summary;
    std::vector<PairwiseTest> tests;
};

// Rows are sorted by cascade id. Tests compare per-model error samples:
// SEIZ vs CD-SEIZ first, then SIS vs SEIZ and SIS vs CD-SEIZ.
ComparisonReport build_comparison_report(std::vector<ComparisonRow> rows);

std::string comparison_csv(const ComparisonReport& report);
std::vector<ComparisonRow> parse_comparison_csv(std::string_view text);
std::string summary_json(const ComparisonReport& report);

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    std::array<std::size_t, 3> counts{};
};

inline constexpr double kHistogramBinWidth = 0.005;
inline constexpr double kHistogramUpper = 0.5;

// Fixed-width error histogram over [0, upper]; the last bin is closed and
// values above `upper` are left out.
std::vector<HistogramBin> error_histogram(const ComparisonReport& report, double bin_width = kHistogramBinWidth,
                                          double upper = kHistogramUpper);
std::string histogram_csv(std::span<const HistogramBin> bins);

} // namespace cascadefit
