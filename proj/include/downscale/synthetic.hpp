#pragma once

// Synthetic coarse/fine world for end-to-end runs. The fine log10 field is a
// static gradient plus mesoscale waves with AR(1) amplitudes, an elevation
// term and small fine-scale AR(1) noise. The coarse field is the fine field
// seen at a coarser effective resolution (Gaussian blur), block-averaged onto
// a 0.5 x 0.625 degree grid, with a systematic gradient bias and a little noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "array2d.hpp"
#include "date.hpp"
#include "raster.hpp"
#include "regrid.hpp"

namespace downscale::synthetic {

struct WorldConfig {
    std::uint64_t seed = 7;
    Date first_day{2005, 4, 1};
    Date last_day{2007, 8, 31};
    std::size_t fine_rows = 64;  // 0.0625 degree pixels
    std::size_t fine_cols = 60;
    double lat0 = 25.0;  // south-west corner of the domain
    double lon0 = 45.0;
    double base = -0.8;         // mean log10 AOD
    double grad_lat = 0.08;     // per degree
    double grad_lon = -0.05;
    int meso_modes = 6;
    double meso_len_min = 2.0;  // wavelength range in degrees
    double meso_len_max = 3.0;
    double meso_amp = 0.10;     // stationary std of each mode amplitude
    double meso_phi = 0.9;
    int fine_modes = 8;
    double fine_len_min = 0.5;
    double fine_len_max = 1.0;
    double fine_amp = 0.008;
    double fine_phi = 0.6;
    double elev_effect = -0.08; // per standard deviation of elevation
    int massifs = 5;
    double massif_min_deg = 0.2;  // Gaussian width range
    double massif_max_deg = 0.7;
    double coarse_noise = 0.003;
    double coarse_smoothing_deg = 0.3;  // Gaussian sigma of the coarse model's effective resolution
    double coarse_bias_lat = 0.05;  // extra gradient of the coarse field, per degree
    double coarse_bias_lon = 0.0;
    int elevation_refine = 4;   // native elevation samples per fine pixel along each axis
};

struct World {
    Grid fine_grid;
    Grid coarse_grid;
    Grid elevation_grid;
    std::vector<Date> dates;
    FieldStack fine_raw;    // "true" high-resolution AOD
    FieldStack coarse_raw;  // coarse reanalysis-like AOD
    Image elevation_native; // metres on elevation_grid
};

namespace detail {

struct Wave {
    double kx, ky, phase;
};

inline std::vector<Wave> waves(std::mt19937_64& rng, int n, double min_len_deg, double max_len_deg) {
    std::uniform_real_distribution<double> len(min_len_deg, max_len_deg), ang(0.0, 2 * std::numbers::pi);
    std::vector<Wave> w;
    for (int i = 0; i < n; ++i) {
        const double k = 2 * std::numbers::pi / len(rng), th = ang(rng);
        w.push_back({k * std::cos(th), k * std::sin(th), ang(rng)});
    }
    return w;
}

inline std::vector<std::vector<double>> ar1_amplitudes(std::mt19937_64& rng, std::size_t days, int modes, double sd,
                                                       double phi) {
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<std::vector<double>> a(days, std::vector<double>(std::size_t(modes)));
    const double innov = sd * std::sqrt(1.0 - phi * phi);
    for (int m = 0; m < modes; ++m) {
        double v = sd * n01(rng);
        for (std::size_t t = 0; t < days; ++t) {
            if (t > 0) v = phi * v + innov * n01(rng);
            a[t][std::size_t(m)] = v;
        }
    }
    return a;
}

// Separable Gaussian filter with edge clamping; sigma in pixels.
inline Image gaussian_smooth(const Image& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int r = int(std::ceil(3.0 * sigma));
    std::vector<double> k(std::size_t(2 * r + 1));
    double ks = 0.0;
    for (int i = -r; i <= r; ++i) ks += k[std::size_t(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& v : k) v /= ks;
    const auto H = std::ptrdiff_t(img.rows()), W = std::ptrdiff_t(img.cols());
    auto clampi = [](std::ptrdiff_t v, std::ptrdiff_t n) { return std::clamp<std::ptrdiff_t>(v, 0, n - 1); };
    Image tmp(img.rows(), img.cols()), out(img.rows(), img.cols());
    for (std::ptrdiff_t i = 0; i < H; ++i)
        for (std::ptrdiff_t j = 0; j < W; ++j) {
            double s = 0.0;
            for (int t = -r; t <= r; ++t) s += k[std::size_t(t + r)] * img(std::size_t(i), std::size_t(clampi(j + t, W)));
            tmp(std::size_t(i), std::size_t(j)) = s;
        }
    for (std::ptrdiff_t i = 0; i < H; ++i)
        for (std::ptrdiff_t j = 0; j < W; ++j) {
            double s = 0.0;
            for (int t = -r; t <= r; ++t) s += k[std::size_t(t + r)] * tmp(std::size_t(clampi(i + t, H)), std::size_t(j));
            out(std::size_t(i), std::size_t(j)) = s;
        }
    return out;
}

}  // namespace detail

inline World make_world(const WorldConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    World w;
    const double fd = 0.0625;
    w.fine_grid = Grid::regular(cfg.lat0 + fd / 2, fd, cfg.fine_rows, cfg.lon0 + fd / 2, fd, cfg.fine_cols);
    const double clat = 0.5, clon = 0.625;
    const auto c_rows = std::size_t(std::round(double(cfg.fine_rows) * fd / clat));
    const auto c_cols = std::size_t(std::round(double(cfg.fine_cols) * fd / clon));
    w.coarse_grid = Grid::regular(cfg.lat0 + clat / 2, clat, c_rows, cfg.lon0 + clon / 2, clon, c_cols);
    const double ed = fd / cfg.elevation_refine;
    const std::size_t er = cfg.fine_rows * std::size_t(cfg.elevation_refine);
    const std::size_t ec = cfg.fine_cols * std::size_t(cfg.elevation_refine);
    w.elevation_grid = Grid::regular(cfg.lat0 + ed / 2, ed, er, cfg.lon0 + ed / 2, ed, ec);

    // terrain: a few Gaussian massifs plus small-scale roughness
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> n01(0.0, 1.0);
    w.elevation_native = Image(er, ec);
    struct Massif { double lat, lon, h, s; };
    std::vector<Massif> massifs;
    const double dlat = double(cfg.fine_rows) * fd, dlon = double(cfg.fine_cols) * fd;
    for (int i = 0; i < cfg.massifs; ++i)
        massifs.push_back({cfg.lat0 + dlat * u01(rng), cfg.lon0 + dlon * u01(rng), 400 + 1600 * u01(rng),
                           cfg.massif_min_deg + (cfg.massif_max_deg - cfg.massif_min_deg) * u01(rng)});
    for (std::size_t i = 0; i < er; ++i)
        for (std::size_t j = 0; j < ec; ++j) {
            const double la = w.elevation_grid.lat()[i], lo = w.elevation_grid.lon()[j];
            double h = 200.0;
            for (const auto& m : massifs) {
                const double r2 = ((la - m.lat) * (la - m.lat) + (lo - m.lon) * (lo - m.lon)) / (m.s * m.s);
                h += m.h * std::exp(-0.5 * r2);
            }
            w.elevation_native(i, j) = h + 30.0 * n01(rng);
        }
    const Image elev_fine = regrid::block_average(w.elevation_native, w.elevation_grid, w.fine_grid);
    double em = 0.0, es = 0.0;
    for (double v : elev_fine.flat()) em += v;
    em /= double(elev_fine.size());
    for (double v : elev_fine.flat()) es += (v - em) * (v - em);
    es = std::sqrt(es / double(elev_fine.size()));

    for (Date d = cfg.first_day; d <= cfg.last_day; ++d) w.dates.push_back(d);
    const std::size_t T = w.dates.size();
    const auto meso = detail::waves(rng, cfg.meso_modes, cfg.meso_len_min, cfg.meso_len_max);
    const auto fine = detail::waves(rng, cfg.fine_modes, cfg.fine_len_min, cfg.fine_len_max);
    const auto meso_a = detail::ar1_amplitudes(rng, T, cfg.meso_modes, cfg.meso_amp, cfg.meso_phi);
    const auto fine_a = detail::ar1_amplitudes(rng, T, cfg.fine_modes, cfg.fine_amp, cfg.fine_phi);

    const std::size_t H = cfg.fine_rows, W = cfg.fine_cols;
    std::vector<double> fine_raw(T * H * W), coarse_raw;
    coarse_raw.reserve(T * w.coarse_grid.n_pixels());
    for (std::size_t t = 0; t < T; ++t) {
        Image logf(H, W);
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j) {
                const double la = w.fine_grid.lat()[i], lo = w.fine_grid.lon()[j];
                double v = cfg.base + cfg.grad_lat * (la - cfg.lat0 - dlat / 2) + cfg.grad_lon * (lo - cfg.lon0 - dlon / 2);
                for (int m = 0; m < cfg.meso_modes; ++m)
                    v += meso_a[t][std::size_t(m)] * std::cos(meso[std::size_t(m)].kx * lo + meso[std::size_t(m)].ky * la + meso[std::size_t(m)].phase);
                for (int m = 0; m < cfg.fine_modes; ++m)
                    v += fine_a[t][std::size_t(m)] * std::cos(fine[std::size_t(m)].kx * lo + fine[std::size_t(m)].ky * la + fine[std::size_t(m)].phase);
                v += cfg.elev_effect * (elev_fine(i, j) - em) / es;
                logf(i, j) = v;
                fine_raw[(t * H + i) * W + j] = std::pow(10.0, v);
            }
        const Image logc = regrid::block_average(detail::gaussian_smooth(logf, cfg.coarse_smoothing_deg / fd),
                                                w.fine_grid, w.coarse_grid);
        for (std::size_t i = 0; i < logc.rows(); ++i)
            for (std::size_t j = 0; j < logc.cols(); ++j) {
                const double bias = cfg.coarse_bias_lat * (w.coarse_grid.lat()[i] - cfg.lat0 - dlat / 2) +
                                    cfg.coarse_bias_lon * (w.coarse_grid.lon()[j] - cfg.lon0 - dlon / 2);
                coarse_raw.push_back(std::pow(10.0, logc(i, j) + bias + cfg.coarse_noise * n01(rng)));
            }
    }
    w.fine_raw = FieldStack(w.fine_grid, w.dates, std::move(fine_raw), Space::raw, "dust_ext_aod_fine");
    w.coarse_raw = FieldStack(w.coarse_grid, w.dates, std::move(coarse_raw), Space::raw, "dust_ext_aod_coarse");
    return w;
}

}  // namespace downscale::synthetic
