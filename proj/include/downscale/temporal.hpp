#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "error.hpp"
#include "raster.hpp"

namespace downscale::temporal {

inline constexpr int kDefaultAcfLags = 30;
inline constexpr int kDefaultMaxLag = 10;

/// Daily mean over valid pixels.
inline std::vector<double> regional_mean_series(const FieldStack& stack) {
    const std::size_t npx = stack.grid().n_pixels();
    std::vector<double> out(stack.n_layers());
    for (std::size_t k = 0; k < stack.n_layers(); ++k) {
        double s = 0.0;
        std::size_t n = 0;
        for (std::size_t p = 0; p < npx; ++p)
            if (stack.valid(k * npx + p)) {
                s += stack.values()[k * npx + p];
                ++n;
            }
        detail::require(n > 0, "regional_mean_series: day without valid pixels");
        out[k] = s / double(n);
    }
    return out;
}

struct AcfPacf {
    std::vector<int> lags;  // 1..K
    std::vector<double> acf;
    std::vector<double> pacf;
    std::size_t n = 0;
};

/// Sample autocorrelation with the biased (1/n) autocovariance.
inline std::vector<double> autocorrelation(std::span<const double> z, int max_lag) {
    const std::size_t n = z.size();
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= double(n);
    auto acov = [&](int k) {
        double s = 0.0;
        for (std::size_t t = std::size_t(k); t < n; ++t) s += (z[t] - mean) * (z[t - std::size_t(k)] - mean);
        return s / double(n);
    };
    const double c0 = acov(0);
    if (!(c0 > 0.0)) throw ValidationError("acf_pacf: zero-variance series");
    std::vector<double> rho(std::size_t(max_lag) + 1);
    rho[0] = 1.0;
    for (int k = 1; k <= max_lag; ++k) rho[std::size_t(k)] = acov(k) / c0;
    return rho;
}

/// ACF for lags 1..K and PACF from the Durbin-Levinson recursion on the ACF.
inline AcfPacf acf_pacf(std::span<const double> series, int max_lag = kDefaultAcfLags) {
    detail::require(max_lag >= 1, "acf_pacf: need at least one lag");
    detail::require(series.size() > std::size_t(max_lag) + 1,
                    "acf_pacf: series length must exceed the number of lags plus one");
    const auto rho = autocorrelation(series, max_lag);
    AcfPacf out;
    out.n = series.size();
    std::vector<double> phi, prev;
    for (int k = 1; k <= max_lag; ++k) {
        double num = rho[std::size_t(k)], den = 1.0;
        for (int j = 1; j < k; ++j) {
            num -= prev[std::size_t(j - 1)] * rho[std::size_t(k - j)];
            den -= prev[std::size_t(j - 1)] * rho[std::size_t(j)];
        }
        const double pkk = num / den;
        phi.assign(std::size_t(k), 0.0);
        for (int j = 1; j < k; ++j)
            phi[std::size_t(j - 1)] = prev[std::size_t(j - 1)] - pkk * prev[std::size_t(k - j - 1)];
        phi[std::size_t(k - 1)] = pkk;
        prev = phi;
        out.lags.push_back(k);
        out.acf.push_back(rho[std::size_t(k)]);
        out.pacf.push_back(pkk);
    }
    return out;
}

struct LagCurve {
    std::vector<int> lags;
    std::vector<double> rmse;  // mean over day pairs
    std::vector<double> r2;    // mean over day pairs with defined R^2
    std::vector<std::size_t> n_pairs;
};

/// Image-wise RMSE and R^2 between day t and day t - lag, averaged over all
/// day pairs. R^2 uses the mean of the day-t image as reference; when the two
/// images are identical it is 1, and pairs with a flat day-t image but a
/// nonzero difference are left out of the R^2 average.
inline LagCurve lag_metrics(const FieldStack& stack, int max_lag = kDefaultMaxLag) {
    detail::require(max_lag >= 1, "lag_metrics: need at least one lag");
    const std::size_t n = stack.n_layers();
    detail::require(n >= std::size_t(max_lag) + 1, "lag_metrics: insufficient days for the requested lags");
    const std::size_t npx = stack.grid().n_pixels();
    const auto& v = stack.values();
    LagCurve out;
    for (int lag = 1; lag <= max_lag; ++lag) {
        double rmse_sum = 0.0, r2_sum = 0.0;
        std::size_t n_rmse = 0, n_r2 = 0;
        for (std::size_t t = std::size_t(lag); t < n; ++t) {
            const std::size_t a = t * npx, b = (t - std::size_t(lag)) * npx;
            double mean = 0.0;
            std::size_t cnt = 0;
            for (std::size_t p = 0; p < npx; ++p)
                if (stack.valid(a + p) && stack.valid(b + p)) {
                    mean += v[a + p];
                    ++cnt;
                }
            if (cnt == 0) continue;
            mean /= double(cnt);
            double ss_diff = 0.0, ss_tot = 0.0;
            for (std::size_t p = 0; p < npx; ++p)
                if (stack.valid(a + p) && stack.valid(b + p)) {
                    const double d = v[a + p] - v[b + p];
                    ss_diff += d * d;
                    const double c = v[a + p] - mean;
                    ss_tot += c * c;
                }
            rmse_sum += std::sqrt(ss_diff / double(cnt));
            ++n_rmse;
            if (ss_diff == 0.0) {
                r2_sum += 1.0;
                ++n_r2;
            } else if (ss_tot > 0.0) {
                r2_sum += 1.0 - ss_diff / ss_tot;
                ++n_r2;
            }
        }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        out.lags.push_back(lag);
        out.rmse.push_back(n_rmse ? rmse_sum / double(n_rmse) : nan);
        out.r2.push_back(n_r2 ? r2_sum / double(n_r2) : nan);
        out.n_pairs.push_back(n_rmse);
    }
    return out;
}

}  // namespace downscale::temporal
