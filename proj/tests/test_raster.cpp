#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "downscale/raster.hpp"

using namespace downscale;

namespace {

Grid small_grid(std::size_t r = 2, std::size_t c = 3) { return Grid::regular(10.0, 0.5, r, 20.0, 0.5, c); }

std::vector<Date> days(std::size_t n, Date first = {2006, 6, 1}) {
    std::vector<Date> d;
    for (std::size_t i = 0; i < n; ++i) d.push_back(first + long(i));
    return d;
}

}  // namespace

TEST(Date, ParseFormatAndArithmetic) {
    const Date d = Date::parse("2007-02-28");
    EXPECT_EQ(d.iso(), "2007-02-28");
    EXPECT_EQ((d + 1).iso(), "2007-03-01");
    EXPECT_EQ(Date::parse("2008-03-01") - Date::parse("2008-02-28"), 2);
    EXPECT_THROW(Date::parse("2007-02-30"), ValidationError);
    EXPECT_THROW(Date::parse("07-02-03"), ValidationError);
}

TEST(Grid, AcceptsDescendingLatitude) {
    EXPECT_NO_THROW(Grid({3.0, 2.0, 1.0}, {0.0, 1.0}));
}

TEST(Grid, RejectsNonMonotoneOrNonFinite) {
    EXPECT_THROW(Grid({1.0, 1.0}, {0.0, 1.0}), ValidationError);
    EXPECT_THROW(Grid({1.0, 3.0, 2.0}, {0.0, 1.0}), ValidationError);
    EXPECT_THROW(Grid({1.0, NAN}, {0.0, 1.0}), ValidationError);
    EXPECT_THROW(Grid({1.0, 2.0}, {0.0, INFINITY}), ValidationError);
}

TEST(FieldStack, ValidatesShapeAndDates) {
    const Grid g = small_grid();
    EXPECT_THROW(FieldStack(g, days(2), std::vector<double>(11, 0.0), Space::raw), ValidationError);
    EXPECT_THROW(FieldStack(g, days(3), std::vector<double>(12, 0.0), Space::raw), ValidationError);
    auto dup = days(2);
    dup[1] = dup[0];
    EXPECT_THROW(FieldStack(g, dup, std::vector<double>(12, 0.0), Space::raw), ValidationError);
    std::vector<double> v(12, 0.0);
    v[4] = NAN;
    EXPECT_THROW(FieldStack(g, days(2), v, Space::raw), ValidationError);
    std::vector<std::uint8_t> m(12, 1);
    m[4] = 0;
    EXPECT_NO_THROW(FieldStack(g, days(2), v, Space::raw, "aod", m));
}

TEST(FieldStack, LayerAccessAndSelect) {
    const Grid g = small_grid();
    std::vector<double> v(18);
    std::iota(v.begin(), v.end(), 0.0);
    const FieldStack s(g, days(3), v, Space::raw);
    EXPECT_EQ(s.n_layers(), 3u);
    EXPECT_EQ(s.image(1)(1, 2), 11.0);
    const std::size_t pick[] = {0, 2};
    const auto sub = s.select(pick);
    EXPECT_EQ(sub.dates()[1], days(3)[2]);
    EXPECT_EQ(sub.image(1)(0, 0), 12.0);
    EXPECT_EQ(*s.index_of(days(3)[2]), 2u);
    EXPECT_FALSE(s.index_of(Date{2001, 1, 1}).has_value());
}

TEST(ToLog10, FloorRuleAndExactValues) {
    const FieldStack s(small_grid(1, 3), days(1), {1.0, 0.0, 100.0}, Space::raw);
    const auto l = to_log10(s, 1e-6);
    EXPECT_EQ(l.space(), Space::log10);
    EXPECT_EQ(l.values()[0], 0.0);
    EXPECT_EQ(l.values()[1], -6.0);
    EXPECT_EQ(l.values()[2], 2.0);
    EXPECT_THROW(to_log10(l), ValidationError);
    EXPECT_THROW(to_log10(s, 0.0), ValidationError);
}

TEST(ToLog10, RoundTripThroughRaw) {
    const FieldStack s(small_grid(1, 3), days(1), {0.3, 0.05, 2.5}, Space::raw);
    const auto back = from_log10(to_log10(s));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(back.values()[i], s.values()[i], 1e-15);
}

TEST(Standardizer, UsesOnlyTrainLayers) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<double> v(5 * 6);
    for (auto& x : v) x = n01(rng);
    const FieldStack s(small_grid(), days(5), v, Space::log10);
    const std::size_t train[] = {0, 1, 3};
    const auto p = fit_standardizer(s, train);
    // independent oracle: gather the train pixels, two-pass population moments
    std::vector<double> pool;
    for (std::size_t k : train) pool.insert(pool.end(), v.begin() + long(k * 6), v.begin() + long(k * 6 + 6));
    const double mean = std::accumulate(pool.begin(), pool.end(), 0.0) / double(pool.size());
    double ss = 0.0;
    for (double x : pool) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(p.mean, mean, 1e-14);
    EXPECT_NEAR(p.std, std::sqrt(ss / double(pool.size())), 1e-14);
    // changing a non-train layer leaves the parameters untouched
    auto w = v;
    for (std::size_t i = 12; i < 18; ++i) w[i] = 1e6;
    const auto q = fit_standardizer(FieldStack(small_grid(), days(5), w, Space::log10), train);
    EXPECT_EQ(p.mean, q.mean);
    EXPECT_EQ(p.std, q.std);
}

TEST(Standardizer, PoolsAcrossStacks) {
    const FieldStack a(small_grid(1, 2), days(1), {0.0, 2.0}, Space::log10);
    const FieldStack b(small_grid(1, 2), days(1), {4.0, 6.0}, Space::log10);
    const FieldStack* both[] = {&a, &b};
    const std::size_t train[] = {0};
    const auto p = fit_standardizer(both, train);
    EXPECT_DOUBLE_EQ(p.mean, 3.0);
    EXPECT_DOUBLE_EQ(p.std, std::sqrt(5.0));
}

TEST(Standardizer, DegenerateInputs) {
    const FieldStack flat(small_grid(1, 3), days(1), {0.0, 0.0, 0.0}, Space::log10);
    const std::size_t train[] = {0};
    EXPECT_THROW(fit_standardizer(flat, train), ValidationError);
    EXPECT_THROW(fit_standardizer(flat, std::span<const std::size_t>{}), ValidationError);
    const FieldStack raw(small_grid(1, 3), days(1), {1.0, 2.0, 3.0}, Space::raw);
    EXPECT_THROW(fit_standardizer(raw, train), ValidationError);
}

TEST(Standardize, ForwardInverseAreExactInverses) {
    const FieldStack s(small_grid(1, 3), days(1), {-1.5, 0.25, 2.0}, Space::log10);
    const StandardizationParams p{0.5, 2.0, 1e-6};
    const auto z = standardize(s, p, Direction::forward);
    EXPECT_EQ(z.space(), Space::standardized);
    EXPECT_DOUBLE_EQ(z.values()[0], -1.0);
    const auto back = standardize(z, p, Direction::inverse);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(back.values()[i], s.values()[i]);
    EXPECT_THROW(standardize(s, p, Direction::inverse), ValidationError);
    EXPECT_THROW(standardize(z, p, Direction::forward), ValidationError);
}

TEST(Space, ParseRoundTrip) {
    for (Space s : {Space::raw, Space::log10, Space::standardized}) EXPECT_EQ(parse_space(to_string(s)), s);
    EXPECT_THROW(parse_space("linear"), ValidationError);
}
