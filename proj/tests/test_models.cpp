#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "cascadefit/models.hpp"

using namespace cascadefit;

namespace {

double sum(std::span<const double> v)
{
    return std::accumulate(v.begin(), v.end(), 0.0);
}

} // namespace

TEST(Models, Dimensions)
{
    EXPECT_EQ(model_dimension(ModelKind::SIS), 2u);
    EXPECT_EQ(model_dimension(ModelKind::SEIZ), 4u);
    EXPECT_EQ(model_dimension(ModelKind::CDSEIZ), 10u);
    EXPECT_EQ(compartment_names(ModelKind::CDSEIZ).size(), 10u);
}

TEST(Models, ParseModelKind)
{
    EXPECT_EQ(parse_model_kind("sis"), ModelKind::SIS);
    EXPECT_EQ(parse_model_kind("SEIZ"), ModelKind::SEIZ);
    EXPECT_EQ(parse_model_kind("cd-seiz"), ModelKind::CDSEIZ);
    EXPECT_EQ(parse_model_kind("cdseiz"), ModelKind::CDSEIZ);
    EXPECT_THROW(parse_model_kind("sir"), std::invalid_argument);
}

TEST(Models, InfectedIndices)
{
    const auto cd = infected_indices(ModelKind::CDSEIZ);
    ASSERT_EQ(cd.size(), 3u);
    EXPECT_EQ(cd[0], 2u);
    EXPECT_EQ(cd[1], 5u);
    EXPECT_EQ(cd[2], 8u);
    EXPECT_EQ(infected_indices(ModelKind::SIS)[0], 1u);
    EXPECT_EQ(infected_indices(ModelKind::SEIZ)[0], 2u);
}

TEST(SisRhs, NoInfectedIsFixedPoint)
{
    const std::array<double, 2> x{100, 0};
    const auto d = sis_rhs(x, SisParams{0.5, 0.1}, 100);
    EXPECT_EQ(d[0], 0.0);
    EXPECT_EQ(d[1], 0.0);
}

TEST(SisRhs, ZeroRates)
{
    const std::array<double, 2> x{90, 10};
    const auto d = sis_rhs(x, SisParams{0, 0}, 100);
    EXPECT_EQ(d[0], 0.0);
    EXPECT_EQ(d[1], 0.0);
}

TEST(SisRhs, HandValues)
{
    const std::array<double, 2> x{90, 10};
    const auto d = sis_rhs(x, SisParams{0.5, 0.1}, 100);
    EXPECT_NEAR(d[0], -4.49, 1e-12);
    EXPECT_NEAR(d[1], 4.49, 1e-12);
}

TEST(SeizRhs, EmptyCompartments)
{
    const std::array<double, 4> x{500, 0, 0, 0};
    const auto d = seiz_rhs(x, SeizParams{0.7, 0.3, 0.2, 0.1, 0.4, 0.5}, 500);
    for (double v : d)
        EXPECT_EQ(v, 0.0);
}

TEST(SeizRhs, DirectInfectionOnly)
{
    const std::array<double, 4> x{90, 5, 5, 0};
    const auto d = seiz_rhs(x, SeizParams{1, 1, 0, 0, 1, 1}, 100);
    EXPECT_NEAR(d[0], -4.5, 1e-12);
    EXPECT_NEAR(d[1], 0.0, 1e-12);
    EXPECT_NEAR(d[2], 4.5, 1e-12);
    EXPECT_NEAR(d[3], 0.0, 1e-12);
}

TEST(SeizRhs, HandEvaluatedFormulas)
{
    // SI/N = SZ/N = 4, EI/N = 0.5
    // dS = -0.8*4 - 0.4*4                      = -4.8
    // dE = 0.7*0.8*4 + 0.4*0.4*4 - 0.2*0.5 - 1  =  1.78
    // dI = 0.3*0.8*4 + 0.2*0.5 + 0.1*10         =  2.06
    // dZ = 0.6*0.4*4                            =  0.96
    const std::array<double, 4> x{80, 10, 5, 5};
    const auto d = seiz_rhs(x, SeizParams{0.8, 0.4, 0.2, 0.1, 0.3, 0.6}, 100);
    EXPECT_NEAR(d[0], -4.8, 1e-12);
    EXPECT_NEAR(d[1], 1.78, 1e-12);
    EXPECT_NEAR(d[2], 2.06, 1e-12);
    EXPECT_NEAR(d[3], 0.96, 1e-12);
}

TEST(SeizRhs, RejectsBadInput)
{
    const SeizParams q{0.8, 0.4, 0.2, 0.1, 0.3, 0.6};
    const std::array<double, 4> nan_state{80, std::numeric_limits<double>::quiet_NaN(), 5, 5};
    EXPECT_THROW(seiz_rhs(nan_state, q, 100), std::invalid_argument);
    const std::array<double, 4> negative{80, -1, 5, 5};
    EXPECT_THROW(seiz_rhs(negative, q, 100), std::invalid_argument);
    const std::array<double, 3> short_state{80, 10, 5};
    EXPECT_THROW(seiz_rhs(short_state, q, 100), std::invalid_argument);
    const std::array<double, 4> ok{80, 10, 5, 5};
    EXPECT_THROW(seiz_rhs(ok, q, 0.0), std::invalid_argument);
    EXPECT_THROW(seiz_rhs(ok, SeizParams{0.8, 0.4, 0.2, 0.1, 1.3, 0.6}, 100), std::invalid_argument);
    EXPECT_THROW(seiz_rhs(ok, SeizParams{std::numeric_limits<double>::infinity(), 0.4, 0.2, 0.1, 0.3, 0.6}, 100),
                 std::invalid_argument);
}

TEST(CdSeizRhs, EmptyCompartments)
{
    std::array<double, 10> x{};
    x[0] = 1000;
    CdSeizParams q;
    q.beta = 0.5;
    q.b = 0.2;
    q.rho = 0.1;
    q.epsilon = 0.3;
    q.p = {0.2, 0.4, 0.6};
    q.l = {0.1, 0.5, 0.9};
    for (double v : cdseiz_rhs(x, q, 1000))
        EXPECT_EQ(v, 0.0);
}

TEST(CdSeizRhs, IdenticalChannelsMatchSeiz)
{
    const SeizParams s{0.8, 0.4, 0.2, 0.1, 0.3, 0.6};
    CdSeizParams q;
    q.beta = s.beta;
    q.b = s.b;
    q.rho = s.rho;
    q.epsilon = s.epsilon;
    q.p = {s.p, s.p, s.p};
    q.l = {s.l, s.l, s.l};
    const std::array<double, 10> x{70, 10, 5, 5, 10, 5, 5, 10, 5, 5};
    const std::array<double, 4> y{70, 10, 5, 5};
    const double n = 120;
    const auto d = cdseiz_rhs(x, q, n);
    const auto ds = seiz_rhs(y, s, n);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t k = 1; k < 4; ++k)
            EXPECT_NEAR(d[3 * c + k], ds[k], 1e-12);
    EXPECT_NEAR(d[0], 3 * ds[0], 1e-12);
}

TEST(CdSeizRhs, SingleChannelEmbedsSeiz)
{
    const SeizParams s{0.9, 0.5, 0.3, 0.2, 0.4, 0.7};
    CdSeizParams q;
    q.beta = s.beta;
    q.b = s.b;
    q.rho = s.rho;
    q.epsilon = s.epsilon;
    q.p = {s.p, 0.1, 0.95};
    q.l = {s.l, 0.2, 0.05};
    const std::array<double, 10> x{850, 60, 40, 50, 0, 0, 0, 0, 0, 0};
    const std::array<double, 4> y{850, 60, 40, 50};
    const auto d = cdseiz_rhs(x, q, 1000);
    const auto ds = seiz_rhs(y, s, 1000);
    for (std::size_t k = 0; k < 4; ++k)
        EXPECT_DOUBLE_EQ(d[k], ds[k]);
    for (std::size_t k = 4; k < 10; ++k)
        EXPECT_EQ(d[k], 0.0);
}

TEST(ModelRhs, DerivativesSumToZero)
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> rate(0.0, 3.0);
    std::uniform_real_distribution<double> prob(0.0, 1.0);
    std::uniform_real_distribution<double> share(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const double n = 1e3 * (1.0 + 99.0 * share(rng));
        CdSeizParams q;
        q.beta = rate(rng);
        q.b = rate(rng);
        q.rho = rate(rng);
        q.epsilon = rate(rng);
        for (std::size_t c = 0; c < 3; ++c) {
            q.p[c] = prob(rng);
            q.l[c] = prob(rng);
        }
        std::vector<double> w(10);
        for (double& v : w)
            v = share(rng);
        const double total = sum(w);
        for (double& v : w)
            v *= n / total;
        EXPECT_NEAR(sum(model_rhs(w, q, n)), 0.0, 1e-12 * n);
    }
}

TEST(Params, PackedVariantRoundTrip)
{
    ModelParams p = SisParams{0.3, 0.2};
    EXPECT_EQ(kind_of(p), ModelKind::SIS);
    p = SeizParams{};
    EXPECT_EQ(kind_of(p), ModelKind::SEIZ);
    CdSeizParams q;
    q.p = {0.1, 0.2, 0.3};
    q.l = {0.4, 0.5, 0.6};
    const SeizParams ch = q.channel(2);
    EXPECT_EQ(ch.p, 0.3);
    EXPECT_EQ(ch.l, 0.6);
    EXPECT_THROW(validate(ModelParams{SisParams{-1.0, 0.0}}), std::invalid_argument);
}
