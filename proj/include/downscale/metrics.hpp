#pragma once

// Pixel-wise skill scores per day (MAE, RMSE, R^2, NSE, KGE and its r / beta /
// gamma components), then averaged over days. Undefined scores are NaN and are
// counted rather than averaged.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"
#include "raster.hpp"

namespace downscale::metrics {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MetricsReport {
    double mae = kNaN;
    double rmse = kNaN;
    double r2 = kNaN;
    double nse = kNaN;
    double kge = kNaN;
    double r = kNaN;
    double beta = kNaN;
    double gamma_ratio = kNaN;
};

inline double kge_from_components(double r, double beta, double gamma_ratio) {
    return 1.0 - std::sqrt((r - 1.0) * (r - 1.0) + (beta - 1.0) * (beta - 1.0) +
                           (gamma_ratio - 1.0) * (gamma_ratio - 1.0));
}

/// Scores for one day over the pixels where `valid` is set (all when empty).
inline MetricsReport day_metrics(std::span<const double> pred, std::span<const double> truth,
                                 std::span<const std::uint8_t> valid = {}) {
    detail::require(pred.size() == truth.size(), "eval_metrics: prediction and truth sizes differ");
    detail::require(valid.empty() || valid.size() == pred.size(), "eval_metrics: mask size differs");
    auto ok = [&](std::size_t i) { return valid.empty() || valid[i]; };
    std::size_t n = 0;
    double sum_t = 0.0, sum_p = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (ok(i)) {
            sum_t += truth[i];
            sum_p += pred[i];
            ++n;
        }
    detail::require(n > 0, "eval_metrics: no valid pixels");
    const double mean_t = sum_t / double(n), mean_p = sum_p / double(n);

    MetricsReport m;
    double abs_err = 0.0, ss_res = 0.0, ss_tot = 0.0, ss_pred = 0.0, cross = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!ok(i)) continue;
        const double e = truth[i] - pred[i];
        abs_err += std::abs(e);
        ss_res += e * e;
        const double dt = truth[i] - mean_t, dp = pred[i] - mean_p;
        ss_tot += dt * dt;
        ss_pred += dp * dp;
        cross += dt * dp;
    }
    m.mae = abs_err / double(n);
    m.rmse = std::sqrt(ss_res / double(n));
    if (ss_tot > 0.0) m.r2 = 1.0 - ss_res / ss_tot;

    // NSE: same expression as R^2, evaluated on its own sums.
    double nse_num = 0.0, nse_den = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!ok(i)) continue;
        const double e = truth[i] - pred[i];
        nse_num += e * e;
        const double dt = truth[i] - mean_t;
        nse_den += dt * dt;
    }
    if (nse_den > 0.0) m.nse = 1.0 - nse_num / nse_den;

    if (ss_tot > 0.0 && ss_pred > 0.0) m.r = cross / (std::sqrt(ss_tot) * std::sqrt(ss_pred));
    if (mean_t != 0.0) m.beta = mean_p / mean_t;
    if (ss_tot > 0.0) m.gamma_ratio = std::sqrt(ss_pred / double(n)) / std::sqrt(ss_tot / double(n));
    if (std::isfinite(m.r) && std::isfinite(m.beta) && std::isfinite(m.gamma_ratio))
        m.kge = kge_from_components(m.r, m.beta, m.gamma_ratio);
    return m;
}

struct DayMetrics {
    Date date;
    MetricsReport scores;
};

struct EvalReport {
    std::vector<DayMetrics> per_day;
    MetricsReport mean;  // per-field mean over days where the score is defined
    std::size_t undefined_r2 = 0;
    std::size_t undefined_kge = 0;
};

inline EvalReport eval_metrics(const FieldStack& pred, const FieldStack& truth, unsigned threads = 1) {
    detail::require(pred.grid() == truth.grid(), "eval_metrics: stacks are on different grids");
    detail::require(pred.dates() == truth.dates(), "eval_metrics: stacks are not aligned on dates");
    detail::require(pred.space() == truth.space(), "eval_metrics: stacks are in different value spaces");
    const std::size_t n = pred.n_layers(), npx = pred.grid().n_pixels();
    EvalReport rep;
    rep.per_day.resize(n);
    parallel_for(n, threads, [&](std::size_t k) {
        std::vector<std::uint8_t> valid(npx);
        for (std::size_t p = 0; p < npx; ++p) valid[p] = pred.valid(k * npx + p) && truth.valid(k * npx + p);
        rep.per_day[k].date = pred.is_static() ? Date{} : pred.dates()[k];
        rep.per_day[k].scores = day_metrics(pred.layer(k), truth.layer(k), valid);
    });
    auto avg = [&](double MetricsReport::*f) {
        double s = 0.0;
        std::size_t c = 0;
        for (const auto& d : rep.per_day)
            if (std::isfinite(d.scores.*f)) {
                s += d.scores.*f;
                ++c;
            }
        return c ? s / double(c) : kNaN;
    };
    for (auto f : {&MetricsReport::mae, &MetricsReport::rmse, &MetricsReport::r2, &MetricsReport::nse,
                   &MetricsReport::kge, &MetricsReport::r, &MetricsReport::beta, &MetricsReport::gamma_ratio})
        rep.mean.*f = avg(f);
    for (const auto& d : rep.per_day) {
        if (!std::isfinite(d.scores.r2)) ++rep.undefined_r2;
        if (!std::isfinite(d.scores.kge)) ++rep.undefined_kge;
    }
    return rep;
}

}  // namespace downscale::metrics
