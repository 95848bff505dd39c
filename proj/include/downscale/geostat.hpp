#pragma once

// Spatial structure: random pixel-pair sampling by great-circle distance,
// binned empirical semivariogram, and a weighted spherical-model fit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <unordered_set>
#include <vector>

#include "array2d.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "raster.hpp"

namespace downscale::geostat {

inline constexpr double kEarthRadiusKm = 6371.0088;
inline constexpr std::size_t kDefaultPairs = 30000;
inline constexpr double kDefaultMaxKm = 600.0;
inline constexpr int kDefaultBins = 24;

inline double haversine_km(double lat1, double lon1, double lat2, double lon2, double radius = kEarthRadiusKm) {
    constexpr double deg = std::numbers::pi / 180.0;
    const double dphi = (lat2 - lat1) * deg, dlam = (lon2 - lon1) * deg;
    const double s = std::sin(dphi / 2), t = std::sin(dlam / 2);
    const double a = s * s + std::cos(lat1 * deg) * std::cos(lat2 * deg) * t * t;
    return 2.0 * radius * std::asin(std::min(1.0, std::sqrt(a)));
}

struct PixelPair {
    std::uint32_t p = 0;  // flat pixel indices (row * n_lon + col)
    std::uint32_t q = 0;
    double km = 0.0;
};

struct PairSample {
    std::vector<PixelPair> pairs;
    std::uint64_t seed = 0;
    double max_km = kDefaultMaxKm;
    bool exhaustive = false;  // every eligible pair was taken
};

/// Uniformly samples up to `n` distinct pixel pairs with 0 < distance <= max_km.
/// When the grid has no more than `n` candidate pairs, all eligible pairs are
/// returned instead.
inline PairSample sample_pairs(const Grid& grid, const Mask& mask, std::size_t n = kDefaultPairs,
                               double max_km = kDefaultMaxKm, std::uint64_t seed = 0) {
    detail::require(mask.empty() || (mask.rows() == grid.n_lat() && mask.cols() == grid.n_lon()),
                    "sample_pairs: mask shape does not match grid");
    detail::require(max_km > 0.0, "sample_pairs: max_km must be positive");
    std::vector<std::uint32_t> valid;
    for (std::size_t i = 0; i < grid.n_pixels(); ++i)
        if (mask.empty() || mask.flat()[i]) valid.push_back(std::uint32_t(i));
    detail::require(valid.size() >= 2, "sample_pairs: need at least two valid pixels");
    const std::size_t W = grid.n_lon();
    auto dist = [&](std::uint32_t a, std::uint32_t b) {
        return haversine_km(grid.lat()[a / W], grid.lon()[a % W], grid.lat()[b / W], grid.lon()[b % W]);
    };
    PairSample out;
    out.seed = seed;
    out.max_km = max_km;
    const std::size_t v = valid.size();
    const std::size_t total = v * (v - 1) / 2;
    if (total <= n) {
        out.exhaustive = true;
        for (std::size_t i = 0; i < v; ++i)
            for (std::size_t j = i + 1; j < v; ++j) {
                const double d = dist(valid[i], valid[j]);
                if (d > 0.0 && d <= max_km) out.pairs.push_back({valid[i], valid[j], d});
            }
        return out;
    }
    std::mt19937_64 rng(seed);
    std::unordered_set<std::uint64_t> seen;
    const std::size_t max_attempts = 200 * n + 1'000'000;
    for (std::size_t attempt = 0; attempt < max_attempts && out.pairs.size() < n; ++attempt) {
        auto a = valid[pipeline::detail::bounded(rng, v)];
        auto b = valid[pipeline::detail::bounded(rng, v)];
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        const std::uint64_t key = (std::uint64_t(a) << 32) | b;
        if (seen.count(key)) continue;
        const double d = dist(a, b);
        if (!(d > 0.0 && d <= max_km)) continue;
        seen.insert(key);
        out.pairs.push_back({a, b, d});
    }
    return out;
}

struct VariogramEstimate {
    std::vector<double> bin_edges;  // km, n_bins + 1
    std::vector<double> bin_centers;
    std::vector<double> gamma;              // 0 for empty bins
    std::vector<std::size_t> pair_counts;

    std::size_t n_bins() const { return gamma.size(); }
    bool empty(std::size_t k) const { return pair_counts[k] == 0; }
};

inline std::size_t bin_of(double d, double max_km, int n_bins) {
    const auto k = static_cast<std::size_t>(d / max_km * n_bins);
    return std::min(k, std::size_t(n_bins - 1));
}

/// gamma_k = mean of (z_p - z_q)^2 / 2 over the pairs in distance bin k.
/// Bins are equal-width over (0, max_km].
inline VariogramEstimate empirical_variogram(std::span<const double> field, const PairSample& sample,
                                             int n_bins = kDefaultBins) {
    detail::require(n_bins >= 1, "empirical_variogram: need at least one bin");
    VariogramEstimate vg;
    const double w = sample.max_km / n_bins;
    for (int k = 0; k <= n_bins; ++k) vg.bin_edges.push_back(w * k);
    for (int k = 0; k < n_bins; ++k) vg.bin_centers.push_back(w * (k + 0.5));
    vg.gamma.assign(std::size_t(n_bins), 0.0);
    vg.pair_counts.assign(std::size_t(n_bins), 0);
    for (const auto& pr : sample.pairs) {
        detail::require(pr.p < field.size() && pr.q < field.size(), "empirical_variogram: pair outside field");
        const double dz = field[pr.p] - field[pr.q];
        detail::require(std::isfinite(dz), "empirical_variogram: pair references an invalid pixel");
        const auto k = bin_of(pr.km, sample.max_km, n_bins);
        vg.gamma[k] += 0.5 * dz * dz;
        ++vg.pair_counts[k];
    }
    bool any = false;
    for (std::size_t k = 0; k < vg.gamma.size(); ++k)
        if (vg.pair_counts[k]) {
            vg.gamma[k] /= double(vg.pair_counts[k]);
            any = true;
        }
    if (!any) throw ValidationError("empirical_variogram: every distance bin is empty");
    return vg;
}

/// Pixels valid on every layer of the stack.
inline Mask common_valid_mask(const FieldStack& s) {
    Mask m(s.rows(), s.cols(), 1);
    if (!s.has_mask()) return m;
    const std::size_t npx = s.grid().n_pixels();
    for (std::size_t k = 0; k < s.n_layers(); ++k)
        for (std::size_t p = 0; p < npx; ++p)
            if (!s.valid(k * npx + p)) m.flat()[p] = 0;
    return m;
}

/// Daily variograms on a shared pair sample, averaged over days (plain mean).
inline VariogramEstimate variogram_stack(const FieldStack& stack, const PairSample& sample,
                                         int n_bins = kDefaultBins, unsigned threads = 1) {
    const std::size_t n = stack.n_layers();
    std::vector<VariogramEstimate> daily(n);
    parallel_for(n, threads, [&](std::size_t k) { daily[k] = empirical_variogram(stack.layer(k), sample, n_bins); });
    VariogramEstimate avg = daily.front();
    for (std::size_t b = 0; b < avg.n_bins(); ++b) {
        double s = 0.0;
        for (const auto& d : daily) s += d.gamma[b];
        avg.gamma[b] = s / double(n);
    }
    return avg;
}

struct SphericalFit {
    double nugget = 0.0;        // c0
    double partial_sill = 0.0;  // c
    double range = 0.0;         // a, km
    double rmse = 0.0;          // pair-count-weighted
    bool pure_nugget = false;   // flat variogram; range not identifiable

    double sill() const { return nugget + partial_sill; }
};

inline double spherical_shape(double h, double range) {
    if (h >= range) return 1.0;
    const double r = h / range;
    return 1.5 * r - 0.5 * r * r * r;
}

inline double spherical_model(double h, const SphericalFit& f) {
    return f.nugget + f.partial_sill * spherical_shape(h, f.range);
}

namespace detail {

struct Bin {
    double h, gamma, w;
};

struct LinearFit {
    double c0 = 0.0, c = 0.0, sse = std::numeric_limits<double>::infinity();
};

inline double sse(std::span<const Bin> bins, double a, double c0, double c) {
    double s = 0.0;
    for (const auto& b : bins) {
        const double r = b.gamma - c0 - c * spherical_shape(b.h, a);
        s += b.w * r * r;
    }
    return s;
}

// Weighted least squares for (c0, c) >= 0 at fixed range. Two variables, so
// the constrained optimum is the interior solution or one of the two faces.
inline LinearFit solve_amplitudes(std::span<const Bin> bins, double a) {
    double sw = 0, sg = 0, sgg = 0, sy = 0, sgy = 0;
    for (const auto& b : bins) {
        const double g = spherical_shape(b.h, a);
        sw += b.w;
        sg += b.w * g;
        sgg += b.w * g * g;
        sy += b.w * b.gamma;
        sgy += b.w * g * b.gamma;
    }
    LinearFit best;
    auto consider = [&](double c0, double c) {
        const double e = sse(bins, a, c0, c);
        if (e < best.sse) best = {c0, c, e};
    };
    const double det = sw * sgg - sg * sg;
    if (det > 1e-12 * sw * sgg) {
        const double c0 = (sgg * sy - sg * sgy) / det;
        const double c = (sw * sgy - sg * sy) / det;
        if (c0 >= 0.0 && c >= 0.0) {
            best = {c0, c, sse(bins, a, c0, c)};
            return best;
        }
    }
    consider(std::max(0.0, sy / sw), 0.0);
    if (sgg > 0.0) consider(0.0, std::max(0.0, sgy / sgg));
    return best;
}

}  // namespace detail

/// Fits c0 + c * sph(h / a) to the non-empty bins, weighting by pair count.
/// The range is searched on a 64-point log grid between the first bin centre
/// and the last bin edge, then refined by golden-section search around the
/// best grid point; amplitudes are solved in closed form at each range.
inline SphericalFit fit_spherical(const VariogramEstimate& vg) {
    std::vector<detail::Bin> bins;
    for (std::size_t k = 0; k < vg.n_bins(); ++k)
        if (!vg.empty(k)) bins.push_back({vg.bin_centers[k], vg.gamma[k], double(vg.pair_counts[k])});
    downscale::detail::require(bins.size() >= 3, "fit_spherical: need at least 3 non-empty bins");
    std::sort(bins.begin(), bins.end(), [](const auto& a, const auto& b) { return a.h < b.h; });
    const double h_max = vg.bin_edges.empty() ? bins.back().h : vg.bin_edges.back();

    double wsum = 0, gmean = 0;
    for (const auto& b : bins) {
        wsum += b.w;
        gmean += b.w * b.gamma;
    }
    gmean /= wsum;
    double spread = 0.0;
    for (const auto& b : bins) spread = std::max(spread, std::abs(b.gamma - gmean));
    if (spread <= 1e-12 * std::max(1.0, std::abs(gmean))) {
        SphericalFit f;
        f.nugget = gmean;
        f.range = h_max;
        f.pure_nugget = true;
        return f;
    }

    constexpr int kGrid = 64;
    const double lo = bins.front().h, hi = h_max;
    std::vector<double> grid(kGrid);
    for (int i = 0; i < kGrid; ++i) grid[std::size_t(i)] = lo * std::pow(hi / lo, double(i) / (kGrid - 1));
    std::size_t best_i = 0;
    double best_sse = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double e = detail::solve_amplitudes(bins, grid[i]).sse;
        if (e < best_sse) {
            best_sse = e;
            best_i = i;
        }
    }
    double a = grid[best_i == 0 ? 0 : best_i - 1];
    double b = grid[std::min(best_i + 1, grid.size() - 1)];
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    auto f = [&](double r) { return detail::solve_amplitudes(bins, r).sse; };
    double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 200 && (b - a) > 1e-10 * b; ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    double range = f1 <= f2 ? x1 : x2;
    if (std::min(f1, f2) > best_sse) range = grid[best_i];
    const auto amp = detail::solve_amplitudes(bins, range);

    SphericalFit out;
    out.nugget = amp.c0;
    out.partial_sill = amp.c;
    out.range = range;
    out.rmse = std::sqrt(amp.sse / wsum);
    out.pure_nugget = amp.c == 0.0;
    return out;
}

}  // namespace downscale::geostat
