#pragma once

// End-to-end run on the synthetic world: log10 + pooled standardization,
// bicubic driver, seasonal split, per-day patch streams, ridge fit with
// validation-selected penalty, overlap-mode test scoring against the
// persistence and coarse-driver baselines, and a short autoregressive rollout.

#include <chrono>
#include <cstdint>
#include <limits>
#include <vector>

#include "metrics.hpp"
#include "pipeline.hpp"
#include "predictor.hpp"
#include "raster.hpp"
#include "regrid.hpp"
#include "similarity.hpp"
#include "synthetic.hpp"
#include "temporal.hpp"

namespace downscale::demo {

struct DemoConfig {
    synthetic::WorldConfig world;
    pipeline::Season season = pipeline::Season::JJA;
    std::uint64_t shuffle_seed = 42;
    std::vector<double> lambdas = {1e-4, 1e-2, 1.0};
    int t_lag = predictor::kDefaultTLag;
    int horizon = 10;
    int lag_curve_max = 5;
    unsigned threads = 1;
};

struct LambdaScore {
    double lambda;
    double validation_mse;
};

struct DemoResult {
    pipeline::SplitAssignment split;
    StandardizationParams standardizer;
    std::vector<LambdaScore> lambda_scores;
    predictor::RidgeModel model;
    predictor::ClampBounds clamp;
    std::size_t train_patches = 0;
    std::size_t validation_patches = 0;
    // test days, overlap context, log10 space
    metrics::EvalReport ridge;
    metrics::EvalReport persistence;
    metrics::EvalReport coarse_driver;
    similarity::WdReport driver_vs_truth;
    similarity::WdReport ridge_vs_truth;
    // autoregressive rollout from the first test day, log10 space
    std::vector<Date> rollout_days;
    temporal::LagCurve rollout_prediction;
    temporal::LagCurve rollout_driver;
    temporal::LagCurve rollout_truth;
    double seconds = 0.0;
};

namespace detail {

inline double patch_mse(std::span<const pipeline::Patch> patches, std::span<const std::size_t> idx,
                        const predictor::RidgeModel& m) {
    double ss = 0.0;
    std::size_t n = 0;
    for (std::size_t k : idx) {
        const auto& pt = patches[k];
        const std::size_t px = std::size_t(pt.height * pt.width), tgt = pt.channels.size() - 1;
        for (std::size_t i = 0; i < px; ++i) {
            double s = m.intercept;
            for (std::size_t c = 0; c < tgt; ++c) s += m.coef[c] * pt.values[c * px + i];
            const double e = s - pt.values[tgt * px + i];
            ss += e * e;
            ++n;
        }
    }
    return n ? ss / double(n) : std::numeric_limits<double>::quiet_NaN();
}

inline std::vector<pipeline::Patch> pick(std::span<const pipeline::Patch> patches, std::span<const std::size_t> idx) {
    std::vector<pipeline::Patch> out;
    out.reserve(idx.size());
    for (std::size_t k : idx) out.push_back(patches[k]);
    return out;
}

inline FieldStack days_of(const FieldStack& s, std::span<const Date> days) {
    const auto idx = layers_for(s, days);
    return s.select(idx);
}

}  // namespace detail

inline DemoResult run_demo(const DemoConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    DemoResult r;
    const auto world = synthetic::make_world(cfg.world);

    // log10 space; driver regridded there
    const FieldStack truth_log = to_log10(world.fine_raw);
    const regrid::RegridPlan plan(world.coarse_grid, world.fine_grid);
    const FieldStack driver_log = regrid::bicubic_regrid(to_log10(world.coarse_raw), plan);
    const Image elevation = regrid::block_average(world.elevation_native, world.elevation_grid, world.fine_grid);

    const auto window = pipeline::build_season_windows(world.dates, cfg.season);
    r.split = pipeline::temporal_split(window);

    const FieldStack* pooled[] = {&truth_log, &driver_log};
    const auto train_layers = layers_for(truth_log, r.split.train);
    r.standardizer = fit_standardizer(pooled, train_layers);
    const FieldStack truth = standardize(truth_log, r.standardizer, Direction::forward);
    const FieldStack driver = standardize(driver_log, r.standardizer, Direction::forward);

    const auto statics = predictor::StaticFields::make(world.fine_grid, elevation);
    const predictor::CalendarFrame cal{world.dates.front(), world.dates.front().year(), world.dates.back().year()};

    predictor::PredictorSpec spec;
    spec.kind = predictor::Kind::ridge_patch;
    spec.t_lag = cfg.t_lag;

    std::vector<Date> fit_days = r.split.train;
    fit_days.insert(fit_days.end(), r.split.val.begin(), r.split.val.end());
    const auto patches = predictor::training_patches(truth, driver, statics, cal, fit_days, spec);
    const auto streams = pipeline::group_by_day(patches, r.split, cfg.shuffle_seed);
    const auto train_set = detail::pick(patches, streams.train);
    r.train_patches = streams.train.size();
    r.validation_patches = streams.validation.size();

    double best = std::numeric_limits<double>::infinity();
    for (double lambda : cfg.lambdas) {
        auto m = predictor::fit_ridge_patch(train_set, lambda);
        const double mse = detail::patch_mse(patches, streams.validation, m);
        r.lambda_scores.push_back({lambda, mse});
        if (mse < best) {
            best = mse;
            r.model = std::move(m);
        }
    }
    r.clamp = predictor::clamp_from_patches(train_set);
    spec.ridge = r.model;
    spec.lambda = r.model.lambda;
    spec.clamp = r.clamp;

    const auto to_log = [&](const FieldStack& s) { return standardize(s, r.standardizer, Direction::inverse); };
    const Date before_test = r.split.test.front() - 1;
    const int n_test = int(r.split.test.size());
    for (std::size_t i = 1; i < r.split.test.size(); ++i)
        downscale::detail::require(r.split.test[i] - r.split.test[i - 1] == 1, "demo: test days must be contiguous");
    const FieldStack truth_test = detail::days_of(truth_log, r.split.test);

    auto score = [&](predictor::Kind kind) {
        auto s = spec;
        s.kind = kind;
        auto state = predictor::initial_state(truth, before_test, s.t_lag);
        const auto pred = predictor::rollout(state, driver, n_test, statics, cal, s, predictor::ContextMode::overlap,
                                             &truth, cfg.threads);
        return to_log(pred);
    };
    const FieldStack ridge_test = score(predictor::Kind::ridge_patch);
    r.ridge = metrics::eval_metrics(ridge_test, truth_test, cfg.threads);
    r.persistence = metrics::eval_metrics(score(predictor::Kind::persistence), truth_test, cfg.threads);
    r.coarse_driver = metrics::eval_metrics(score(predictor::Kind::coarse_driver), truth_test, cfg.threads);

    const FieldStack truth_test_raw = from_log10(truth_test);
    r.driver_vs_truth = similarity::wd_report(from_log10(detail::days_of(driver_log, r.split.test)), truth_test_raw,
                                              similarity::kDefaultBins, kDefaultFloorEps, cfg.threads);
    r.ridge_vs_truth = similarity::wd_report(from_log10(ridge_test), truth_test_raw, similarity::kDefaultBins,
                                             kDefaultFloorEps, cfg.threads);

    auto state = predictor::initial_state(truth, before_test, spec.t_lag);
    const FieldStack roll = to_log(predictor::rollout(state, driver, cfg.horizon, statics, cal, spec,
                                                      predictor::ContextMode::autoregressive, nullptr, cfg.threads));
    r.rollout_days = roll.dates();
    const int max_lag = std::min(cfg.lag_curve_max, cfg.horizon - 1);
    r.rollout_prediction = temporal::lag_metrics(roll, max_lag);
    r.rollout_driver = temporal::lag_metrics(detail::days_of(driver_log, r.rollout_days), max_lag);
    r.rollout_truth = temporal::lag_metrics(detail::days_of(truth_log, r.rollout_days), max_lag);

    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

/// True when value lies in the closed interval spanned by a and b.
inline bool between(double value, double a, double b) {
    return value >= std::min(a, b) && value <= std::max(a, b);
}

}  // namespace downscale::demo
