#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "cascadefit/nelder_mead.hpp"

using namespace cascadefit::optim;

TEST(NelderMead, Quadratic)
{
    const std::vector<double> lo{-5, -5};
    const std::vector<double> hi{5, 5};
    const auto r = nelder_mead(
        [](std::span<const double> x) { return (x[0] - 1.0) * (x[0] - 1.0) + 4.0 * (x[1] + 2.0) * (x[1] + 2.0); },
        {3.0, 3.0}, lo, hi);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.x[0], 1.0, 1e-4);
    EXPECT_NEAR(r.x[1], -2.0, 1e-4);
}

TEST(NelderMead, Rosenbrock)
{
    const std::vector<double> lo{-2, -2};
    const std::vector<double> hi{2, 2};
    NelderMeadOptions opts;
    opts.max_evals = 5000;
    opts.xtol = 1e-9;
    opts.ftol = 1e-14;
    opts.max_restarts = 2;
    const auto r = nelder_mead(
        [](std::span<const double> x) {
            return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
        },
        {-1.2, 1.0}, lo, hi, opts);
    EXPECT_NEAR(r.x[0], 1.0, 1e-4);
    EXPECT_NEAR(r.x[1], 1.0, 1e-4);
}

TEST(NelderMead, RespectsBoundsAndImprovesMonotonically)
{
    const std::vector<double> lo{0.0, 0.5, -1.0};
    const std::vector<double> hi{1.0, 2.0, 0.0};
    bool inside = true;
    const auto r = nelder_mead(
        [&](std::span<const double> x) {
            for (std::size_t k = 0; k < x.size(); ++k)
                inside = inside && x[k] >= lo[k] && x[k] <= hi[k];
            // Unconstrained minimum at (3, -1, 4), outside the box.
            return std::pow(x[0] - 3.0, 2) + std::pow(x[1] + 1.0, 2) + std::pow(x[2] - 4.0, 2);
        },
        {0.5, 1.0, -0.5}, lo, hi);
    EXPECT_TRUE(inside);
    EXPECT_NEAR(r.x[0], 1.0, 1e-5);
    EXPECT_NEAR(r.x[1], 0.5, 1e-5);
    EXPECT_NEAR(r.x[2], 0.0, 1e-5);
    ASSERT_FALSE(r.best_history.empty());
    for (std::size_t k = 1; k < r.best_history.size(); ++k)
        EXPECT_LE(r.best_history[k], r.best_history[k - 1]);
    EXPECT_EQ(r.best_history.back(), r.f);
}

TEST(NelderMead, NanIsTreatedAsInfinity)
{
    const std::vector<double> lo{-1};
    const std::vector<double> hi{1};
    const auto r = nelder_mead(
        [](std::span<const double> x) {
            return x[0] < 0.0 ? std::numeric_limits<double>::quiet_NaN() : (x[0] - 0.25) * (x[0] - 0.25);
        },
        {0.6}, lo, hi);
    EXPECT_NEAR(r.x[0], 0.25, 1e-5);
}

TEST(NelderMead, EvaluationBudget)
{
    const std::vector<double> lo{-10, -10, -10, -10};
    const std::vector<double> hi{10, 10, 10, 10};
    NelderMeadOptions opts;
    opts.max_evals = 57;
    opts.max_restarts = 3;
    std::size_t calls = 0;
    const auto r = nelder_mead(
        [&](std::span<const double> x) {
            ++calls;
            return std::abs(x[0]) + std::abs(x[1] - 1) + std::abs(x[2] - 2) + std::abs(x[3] - 3);
        },
        {9, 9, 9, 9}, lo, hi, opts);
    EXPECT_LE(calls, 57u);
    EXPECT_EQ(r.n_evals, calls);
}
