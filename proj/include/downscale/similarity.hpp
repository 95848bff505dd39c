#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "array2d.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "raster.hpp"

namespace downscale::similarity {

inline constexpr int kDefaultBins = 256;

struct JointNormBounds {
    double min = 0.0;  // m_t
    double max = 0.0;  // M_t
};

/// Jointly normalized samples of both fields over the shared valid set.
struct NormalizedPair {
    std::vector<double> x;
    std::vector<double> y;
    JointNormBounds bounds;
};

/// Log-min-max normalization with shared bounds. Inputs are raw values unless
/// `already_log10`; then the log step is skipped. Pixels where `valid` is 0
/// (when given) are dropped.
inline NormalizedPair joint_normalize(std::span<const double> x, std::span<const double> y,
                                      std::span<const std::uint8_t> valid = {}, double eps = kDefaultFloorEps,
                                      bool already_log10 = false) {
    detail::require(x.size() == y.size(), "joint_normalize: field sizes differ");
    detail::require(valid.empty() || valid.size() == x.size(), "joint_normalize: mask size differs");
    detail::require(eps > 0.0, "joint_normalize: eps must be positive");
    auto to_b = [&](double v) { return already_log10 ? v : std::log10(std::max(v, eps)); };
    NormalizedPair out;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!valid.empty() && !valid[i]) continue;
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
        out.x.push_back(to_b(x[i]));
        out.y.push_back(to_b(y[i]));
    }
    detail::require(!out.x.empty(), "joint_normalize: no pixel is valid in both fields");
    const auto [xmin, xmax] = std::minmax_element(out.x.begin(), out.x.end());
    const auto [ymin, ymax] = std::minmax_element(out.y.begin(), out.y.end());
    out.bounds = {std::min(*xmin, *ymin), std::max(*xmax, *ymax)};
    const double span = out.bounds.max - out.bounds.min;
    if (!(span > 0.0)) throw ValidationError("joint_normalize: degenerate bounds (all values equal)");
    auto norm = [&](double b) { return std::clamp((b - out.bounds.min) / span, 0.0, 1.0); };
    for (auto& v : out.x) v = norm(v);
    for (auto& v : out.y) v = norm(v);
    return out;
}

/// Exact 1-Wasserstein distance: integral of |F_a - F_b| between the two
/// empirical CDFs, swept over the merged sorted samples.
inline double wasserstein_exact(std::span<const double> a, std::span<const double> b) {
    detail::require(!a.empty() && !b.empty(), "wasserstein_exact: empty sample set");
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double na = double(sa.size()), nb = double(sb.size());
    std::size_t i = 0, j = 0;
    double prev = std::min(sa.front(), sb.front());
    double total = 0.0;
    while (i < sa.size() || j < sb.size()) {
        const double next = j >= sb.size() || (i < sa.size() && sa[i] <= sb[j]) ? sa[i] : sb[j];
        total += std::abs(double(i) / na - double(j) / nb) * (next - prev);
        while (i < sa.size() && sa[i] == next) ++i;
        while (j < sb.size() && sb[j] == next) ++j;
        prev = next;
    }
    return total;
}

/// Cumulative histogram on [0,1] with `bins` equal-width bins; entry k-1 is
/// the fraction of samples below k/bins (the last bin is closed).
inline std::vector<double> cumulative_histogram(std::span<const double> a, int bins) {
    std::vector<double> h(std::size_t(bins), 0.0);
    for (double v : a) {
        detail::require(v >= 0.0 && v <= 1.0, "wasserstein_hist: samples must lie in [0, 1]");
        const auto k = std::min(static_cast<int>(v * bins), bins - 1);
        h[std::size_t(k)] += 1.0;
    }
    double run = 0.0;
    for (auto& c : h) {
        run += c;
        c = run / double(a.size());
    }
    return h;
}

/// Riemann-sum estimate (1/B) sum_k |F_a(k/B) - F_b(k/B)|.
inline double wasserstein_hist(std::span<const double> a, std::span<const double> b, int bins = kDefaultBins) {
    detail::require(bins >= 2, "wasserstein_hist: need at least 2 bins");
    detail::require(!a.empty() && !b.empty(), "wasserstein_hist: empty sample set");
    const auto fa = cumulative_histogram(a, bins), fb = cumulative_histogram(b, bins);
    double s = 0.0;
    for (std::size_t k = 0; k < fa.size(); ++k) s += std::abs(fa[k] - fb[k]);
    return s / double(bins);
}

/// Nearest-rank percentile (p in (0, 100]).
inline double percentile_nearest_rank(std::vector<double> v, double p) {
    detail::require(!v.empty(), "percentile: empty input");
    std::sort(v.begin(), v.end());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * double(v.size())));
    rank = std::clamp<std::size_t>(rank, 1, v.size());
    return v[rank - 1];
}

struct DayDistance {
    Date date;
    double wd = 0.0;        // histogram estimate
    double wd_exact = 0.0;  // sorted-sample value, for reference
    std::size_t n_pixels = 0;
};

struct WdReport {
    int bins = kDefaultBins;
    std::vector<DayDistance> per_day;
    double mean = 0.0;
    double p10 = 0.0;
    double p90 = 0.0;
    double pooled = 0.0;  // over all days' per-day-normalized samples
};

inline WdReport wd_report(const FieldStack& x, const FieldStack& y, int bins = kDefaultBins,
                          double eps = kDefaultFloorEps, unsigned threads = 1) {
    detail::require(x.grid() == y.grid(), "wd_report: stacks are on different grids");
    detail::require(x.dates() == y.dates(), "wd_report: stacks are not aligned on dates");
    detail::require(x.space() == y.space() && x.space() != Space::standardized,
                    "wd_report: both stacks must be raw or both log10");
    const bool logged = x.space() == Space::log10;
    const std::size_t n = x.n_layers();
    const std::size_t npx = x.grid().n_pixels();
    std::vector<NormalizedPair> pairs(n);
    std::vector<DayDistance> days(n);
    parallel_for(n, threads, [&](std::size_t k) {
        std::vector<std::uint8_t> valid(npx, 1);
        for (std::size_t p = 0; p < npx; ++p) valid[p] = x.valid(k * npx + p) && y.valid(k * npx + p);
        pairs[k] = joint_normalize(x.layer(k), y.layer(k), valid, eps, logged);
        days[k].date = x.is_static() ? Date{} : x.dates()[k];
        days[k].wd = wasserstein_hist(pairs[k].x, pairs[k].y, bins);
        days[k].wd_exact = wasserstein_exact(pairs[k].x, pairs[k].y);
        days[k].n_pixels = pairs[k].x.size();
    });
    WdReport r;
    r.bins = bins;
    r.per_day = std::move(days);
    std::vector<double> vals;
    std::vector<double> px, py;
    for (std::size_t k = 0; k < n; ++k) {
        vals.push_back(r.per_day[k].wd);
        px.insert(px.end(), pairs[k].x.begin(), pairs[k].x.end());
        py.insert(py.end(), pairs[k].y.begin(), pairs[k].y.end());
    }
    double s = 0.0;
    for (double v : vals) s += v;
    r.mean = s / double(vals.size());
    r.p10 = percentile_nearest_rank(vals, 10.0);
    r.p90 = percentile_nearest_rank(vals, 90.0);
    r.pooled = wasserstein_hist(px, py, bins);
    return r;
}

}  // namespace downscale::similarity
