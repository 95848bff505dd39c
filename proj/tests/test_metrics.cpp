#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "downscale/metrics.hpp"

using namespace downscale;
using namespace downscale::metrics;

namespace {

std::vector<double> draw(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.1, 2.0);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

}  // namespace

TEST(Metrics, PerfectPrediction) {
    std::mt19937_64 rng(1);
    const auto t = draw(rng, 500);
    const auto m = day_metrics(t, t);
    EXPECT_EQ(m.mae, 0.0);
    EXPECT_EQ(m.rmse, 0.0);
    EXPECT_NEAR(m.r2, 1.0, 1e-12);
    EXPECT_NEAR(m.nse, 1.0, 1e-12);
    EXPECT_NEAR(m.kge, 1.0, 1e-12);
    EXPECT_NEAR(m.r, 1.0, 1e-12);
    EXPECT_NEAR(m.beta, 1.0, 1e-12);
    EXPECT_NEAR(m.gamma_ratio, 1.0, 1e-12);
}

TEST(Metrics, DoubledPrediction) {
    std::mt19937_64 rng(2);
    const auto t = draw(rng, 500);
    std::vector<double> p(t);
    for (double& v : p) v *= 2;
    const auto m = day_metrics(p, t);
    EXPECT_NEAR(m.kge, 1.0 - std::sqrt(2.0), 1e-9);
    EXPECT_NEAR(m.beta, 2.0, 1e-12);
    EXPECT_NEAR(m.gamma_ratio, 2.0, 1e-12);
}

TEST(Metrics, HandComputedDay) {
    const std::vector<double> t = {1, 2, 3, 4}, p = {1, 3, 3, 5};
    const auto m = day_metrics(p, t);
    EXPECT_DOUBLE_EQ(m.mae, 0.5);
    EXPECT_DOUBLE_EQ(m.rmse, std::sqrt(0.5));
    EXPECT_DOUBLE_EQ(m.r2, 1.0 - 2.0 / 5.0);
    EXPECT_DOUBLE_EQ(m.beta, 3.0 / 2.5);
}

TEST(Metrics, R2EqualsNseAndKgeRecomposes) {
    std::mt19937_64 rng(3);
    const Grid g = Grid::regular(0, 1, 6, 0, 1, 7);
    for (int s = 0; s < 100; ++s) {
        std::vector<Date> d = {Date{2006, 7, 1}, Date{2006, 7, 2}, Date{2006, 7, 3}};
        const FieldStack p(g, d, draw(rng, 126), Space::log10), t(g, d, draw(rng, 126), Space::log10);
        const auto rep = eval_metrics(p, t);
        for (const auto& day : rep.per_day) {
            EXPECT_EQ(day.scores.r2, day.scores.nse);
            EXPECT_NEAR(day.scores.kge, kge_from_components(day.scores.r, day.scores.beta, day.scores.gamma_ratio), 1e-12);
        }
        EXPECT_EQ(rep.mean.r2, rep.mean.nse);
    }
}

TEST(Metrics, UndefinedScoresAreCounted) {
    const Grid g = Grid::regular(0, 1, 1, 0, 1, 3);
    std::vector<Date> d = {Date{2006, 7, 1}, Date{2006, 7, 2}};
    const FieldStack t(g, d, {1, 1, 1, 1, 2, 3}, Space::log10), p(g, d, {1, 2, 3, 1, 2, 3}, Space::log10);
    const auto rep = eval_metrics(p, t, 2);
    EXPECT_EQ(rep.undefined_r2, 1u);
    EXPECT_EQ(rep.undefined_kge, 1u);
    EXPECT_TRUE(std::isnan(rep.per_day[0].scores.r2));
    EXPECT_DOUBLE_EQ(rep.mean.r2, 1.0);
    EXPECT_THROW(eval_metrics(p, FieldStack(g, d, {1, 1, 1, 1, 2, 3}, Space::raw)), ValidationError);
}

TEST(Metrics, MaskedPixelsIgnored) {
    const std::vector<double> t = {1, 2, 100}, p = {1, 2, -50};
    const std::vector<std::uint8_t> v = {1, 1, 0};
    EXPECT_EQ(day_metrics(p, t, v).rmse, 0.0);
}
