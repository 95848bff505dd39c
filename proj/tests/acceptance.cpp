// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Each check is self-contained and uses fixed seeds.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "downscale/demo.hpp"
#include "downscale/geostat.hpp"
#include "downscale/metrics.hpp"
#include "downscale/pipeline.hpp"
#include "downscale/regrid.hpp"
#include "downscale/similarity.hpp"
#include "downscale/stitch.hpp"
#include "downscale/temporal.hpp"

using namespace downscale;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

std::vector<stitch::PredictedPatch> random_patches(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-3, 3);
    std::vector<stitch::PredictedPatch> out;
    for (const auto& o : pipeline::patch_origins(64, 64, {16, 16, 2, 0}, true)) {
        stitch::PredictedPatch p{o.y0, o.x0, Image(16, 16)};
        for (double& v : p.values.flat()) v = u(rng);
        out.push_back(std::move(p));
    }
    return out;
}

stitch::StitchResult stitch_in_batches(const std::vector<stitch::PredictedPatch>& ps, const std::vector<std::size_t>& cuts) {
    stitch::StitchAccumulator acc(64, 64, 16, 16, 2);
    std::size_t begin = 0;
    for (std::size_t end : cuts) {
        acc.accumulate(std::span<const stitch::PredictedPatch>(ps).subspan(begin, end - begin));
        begin = end;
    }
    return acc.finalize();
}

Outcome stitch_partition() {
    const auto t0 = Clock::now();
    Outcome o;
    std::mt19937_64 rng(101);
    auto patches = random_patches(rng);
    const auto ref = stitch_in_batches(patches, {patches.size()});
    double worst = 0;
    bool bit_exact = true;
    for (int trial = 0; trial < 20; ++trial) {
        auto order = patches;
        if (trial % 2) std::shuffle(order.begin(), order.end(), rng);
        std::vector<std::size_t> cuts;
        for (std::size_t i = 0; i < order.size();) {
            i = std::min(order.size(), i + 1 + std::size_t(rng() % 200));
            cuts.push_back(i);
        }
        const auto r = stitch_in_batches(order, cuts);
        o.check(r.covered == ref.covered, "coverage differs");
        for (std::size_t k = 0; k < r.image.size(); ++k) {
            const double a = r.image.flat()[k], b = ref.image.flat()[k];
            worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
            if (trial % 2 == 0 && a != b) bit_exact = false;
        }
    }
    const double secs = seconds_since(t0);
    o.check(worst <= 1e-10, fmt("max relative deviation %.3g", worst));
    o.check(bit_exact, "same order with different batch sizes is not bit-exact");
    o.check(secs < 5.0, fmt("runtime %.2f s", secs));
    o.detail += (o.detail.empty() ? "" : "; ") + fmt("max rel dev %.2g, %.2f s", worst, secs);
    return o;
}

Outcome stitch_constant() {
    Outcome o;
    std::mt19937_64 rng(102);
    auto patches = random_patches(rng);
    const double c = 0.734;
    for (auto& p : patches) std::fill(p.values.flat().begin(), p.values.flat().end(), c);
    const auto r = stitch_in_batches(patches, {patches.size()});
    double worst = 0;
    std::size_t uncovered_interior = 0;
    for (std::size_t i = 0; i < 64; ++i)
        for (std::size_t j = 0; j < 64; ++j) {
            if (r.covered(i, j)) worst = std::max(worst, std::abs(r.image(i, j) - c));
            if (i > 0 && j > 0 && i < 63 && j < 63 && !r.covered(i, j)) ++uncovered_interior;
        }
    o.check(worst <= 1e-12, fmt("max deviation %.3g", worst));
    o.check(uncovered_interior == 0, fmt("%g interior pixels uncovered", double(uncovered_interior)));
    if (o.pass) o.detail = fmt("max deviation %.2g, interior fully covered", worst);
    return o;
}

Outcome hann() {
    Outcome o;
    const auto w = stitch::hann_window(4);
    const double want[] = {0, 0.75, 0.75, 0};
    for (int i = 0; i < 4; ++i) o.check(std::abs(w[std::size_t(i)] - want[i]) <= 1e-12, fmt("w(%g;4) = %.17g", i, w[std::size_t(i)]));
    for (int n = 2; n <= 64; ++n) {
        const auto v = stitch::hann_window(n);
        o.check(std::abs(v.front()) <= 1e-12 && std::abs(v.back()) <= 1e-12, fmt("nonzero endpoint at N = %g", n));
    }
    if (o.pass) o.detail = fmt("w(.;4) = (%.3g, %.17g, %.17g, 0), endpoints zero for N = 2..64", w[0], w[1], w[2]);
    return o;
}

Outcome wasserstein() {
    Outcome o;
    std::mt19937_64 rng(104);
    std::uniform_real_distribution<double> u(0, 1);
    double worst = 0;
    for (int t = 0; t < 200; ++t) {
        // power-law and interval-restricted shapes on [0, 1]
        const double ka = 0.3 + 3 * u(rng), kb = 0.3 + 3 * u(rng);
        const double la = 0.5 * u(rng), lb = 0.5 * u(rng);
        std::vector<double> a(4096), b(4096);
        for (double& x : a) x = la + (1 - la) * std::pow(u(rng), ka);
        for (double& x : b) x = lb + (1 - lb) * std::pow(u(rng), kb);
        worst = std::max(worst, std::abs(similarity::wasserstein_hist(a, b, 256) - similarity::wasserstein_exact(a, b)));
    }
    o.check(worst <= 1.0 / 256, fmt("max |hist - exact| %.3g > 1/256", worst));
    std::vector<double> a(4096), b(4096);
    for (double& x : a) x = 0.1 + 0.4 * u(rng);
    o.check(similarity::wasserstein_hist(a, a) == 0.0 && similarity::wasserstein_exact(a, a) == 0.0, "identical inputs give nonzero distance");
    const double delta = 0.2;
    for (double& x : b) x = 0.1 + delta + 0.4 * u(rng);
    const double shifted = similarity::wasserstein_hist(a, b);
    o.check(std::abs(shifted - delta) <= 0.1 * delta, fmt("shift %.3g recovered as %.4g", delta, shifted));
    o.detail += (o.detail.empty() ? "" : "; ") + fmt("max |hist - exact| %.2g (bound %.2g), shift 0.2 -> %.4f", worst, 1.0 / 256, shifted);
    return o;
}

Outcome variogram() {
    const auto t0 = Clock::now();
    Outcome o;
    std::mt19937_64 rng(105);
    std::normal_distribution<double> nd;
    // exhaustive pairs on a 10 x 10 field against an all-pairs loop
    const Grid g = Grid::regular(24.7, 0.45, 10, 44.9, 0.55, 10);
    std::vector<double> f(100);
    for (double& v : f) v = nd(rng);
    const auto s = geostat::sample_pairs(g, Mask(), geostat::kDefaultPairs, 600.0, 1);
    const auto vg = geostat::empirical_variogram(f, s, 24);
    std::vector<double> sum(24, 0.0);
    std::vector<std::size_t> cnt(24, 0);
    for (std::size_t p = 0; p < 100; ++p)
        for (std::size_t q = 0; q < 100; ++q) {
            if (q <= p) continue;
            const double d = geostat::haversine_km(g.lat()[p / 10], g.lon()[p % 10], g.lat()[q / 10], g.lon()[q % 10]);
            if (!(d > 0 && d <= 600.0)) continue;
            const auto k = std::min<std::size_t>(std::size_t(d / 25.0), 23);
            sum[k] += 0.5 * (f[p] - f[q]) * (f[p] - f[q]);
            ++cnt[k];
        }
    double worst = 0;
    for (std::size_t k = 0; k < 24; ++k) {
        o.check(cnt[k] == vg.pair_counts[k], fmt("bin %g pair count differs", double(k)));
        if (cnt[k]) worst = std::max(worst, std::abs(vg.gamma[k] - sum[k] / double(cnt[k])));
    }
    o.check(s.exhaustive, "10 x 10 sample was not exhaustive");
    o.check(worst <= 1e-12, fmt("exhaustive deviation %.3g", worst));

    // white noise, sigma^2 = 1, 30000 pairs on a long strip
    const Grid strip = Grid::regular(25, 0.0625, 4, 45, 0.0625, 500);
    std::vector<double> w(strip.n_pixels());
    for (double& v : w) v = nd(rng);
    const auto wv = geostat::empirical_variogram(w, geostat::sample_pairs(strip, Mask(), 30000, 600.0, 2), 24);
    double lo = 1e9, hi = -1e9;
    for (std::size_t k = 0; k < wv.n_bins(); ++k) {
        o.check(wv.pair_counts[k] > 0, "empty white-noise bin");
        lo = std::min(lo, wv.gamma[k]);
        hi = std::max(hi, wv.gamma[k]);
    }
    o.check(lo >= 0.85 && hi <= 1.15, fmt("white-noise gamma spans [%.3f, %.3f]", lo, hi));

    // noiseless spherical curve
    geostat::SphericalFit truth;
    truth.nugget = 0.1;
    truth.partial_sill = 0.9;
    truth.range = 300;
    geostat::VariogramEstimate curve;
    for (int k = 0; k <= 24; ++k) curve.bin_edges.push_back(25.0 * k);
    for (int k = 0; k < 24; ++k) {
        curve.bin_centers.push_back(25.0 * (k + 0.5));
        curve.gamma.push_back(geostat::spherical_model(curve.bin_centers.back(), truth));
        curve.pair_counts.push_back(1000);
    }
    const auto fit = geostat::fit_spherical(curve);
    const double err = std::max({std::abs(fit.nugget - 0.1) / 0.1, std::abs(fit.partial_sill - 0.9) / 0.9, std::abs(fit.range - 300) / 300});
    o.check(err <= 0.01, fmt("spherical fit (%.4g, %.4g, %.4g)", fit.nugget, fit.partial_sill, fit.range));
    const double secs = seconds_since(t0);
    o.check(secs < 10.0, fmt("runtime %.2f s", secs));
    o.detail += (o.detail.empty() ? "" : "; ") + fmt("white noise gamma in [%.3f, %.3f], fit rel err %.1e", lo, hi, err);
    return o;
}

Outcome acf_pacf() {
    Outcome o;
    std::mt19937_64 rng(106);
    std::normal_distribution<double> nd;
    const std::size_t n = 5000;
    std::vector<double> z(n);
    double x = 0;
    for (int i = 0; i < 200; ++i) x = 0.6 * x + nd(rng);
    for (auto& v : z) v = x = 0.6 * x + nd(rng);
    const auto r = temporal::acf_pacf(z, 5);
    o.check(r.acf[0] >= 0.57 && r.acf[0] <= 0.63, fmt("ACF(1) = %.4f", r.acf[0]));
    const double band = 2.0 / std::sqrt(double(n));
    for (int k = 2; k <= 5; ++k) o.check(std::abs(r.pacf[std::size_t(k - 1)]) <= band, fmt("PACF(%g) = %.4f", k, r.pacf[std::size_t(k - 1)]));
    // the PACF at lag k is the last coefficient of the order-k autoregression
    // fitted to the sample autocorrelations (Yule-Walker normal equations)
    const auto rho = temporal::autocorrelation(z, 5);
    double worst = 0;
    for (int k = 1; k <= 5; ++k) {
        Eigen::MatrixXd R(k, k);
        Eigen::VectorXd rv(k);
        for (int i = 0; i < k; ++i) {
            rv(i) = rho[std::size_t(i + 1)];
            for (int j = 0; j < k; ++j) R(i, j) = rho[std::size_t(std::abs(i - j))];
        }
        worst = std::max(worst, std::abs(R.ldlt().solve(rv)(k - 1) - r.pacf[std::size_t(k - 1)]));
    }
    o.check(worst <= 1e-6, fmt("Durbin-Levinson vs regression %.3g", worst));
    o.detail += (o.detail.empty() ? "" : "; ") + fmt("ACF(1) %.4f, regression agreement %.1e", r.acf[0], worst);
    return o;
}

Outcome metric_identities() {
    Outcome o;
    std::mt19937_64 rng(107);
    std::uniform_real_distribution<double> u(0.05, 3.0);
    std::vector<double> t(1000);
    for (double& v : t) v = u(rng);
    const auto m = metrics::day_metrics(t, t);
    for (double s : {m.r2, m.nse, m.kge, m.r, m.beta, m.gamma_ratio}) o.check(std::abs(s - 1) <= 1e-12, fmt("skill %.17g != 1", s));
    o.check(std::abs(m.mae) <= 1e-12 && std::abs(m.rmse) <= 1e-12, "errors nonzero for a perfect prediction");
    std::vector<double> p2(t);
    for (double& v : p2) v *= 2;
    const double kge = metrics::day_metrics(p2, t).kge;
    o.check(std::abs(kge - (1 - std::sqrt(2.0))) <= 1e-9, fmt("KGE(2x) = %.12f", kge));
    const Grid g = Grid::regular(0, 1, 8, 0, 1, 8);
    std::size_t mismatches = 0;
    for (int s = 0; s < 100; ++s) {
        const std::size_t days = 1 + rng() % 5;
        std::vector<Date> d;
        for (std::size_t k = 0; k < days; ++k) d.push_back(Date{2006, 7, 1} + long(k));
        std::vector<double> a(days * 64), b(days * 64);
        for (double& v : a) v = u(rng);
        for (double& v : b) v = u(rng);
        const auto rep = metrics::eval_metrics(FieldStack(g, d, a, Space::log10), FieldStack(g, d, b, Space::log10));
        for (const auto& day : rep.per_day)
            if (day.scores.r2 != day.scores.nse) ++mismatches;
        if (rep.mean.r2 != rep.mean.nse) ++mismatches;
    }
    o.check(mismatches == 0, fmt("%g R2/NSE mismatches", double(mismatches)));
    if (o.pass) o.detail = fmt("KGE(2x) - (1 - sqrt 2) = %.1e", kge - (1 - std::sqrt(2.0)));
    return o;
}

Outcome regrid_checks() {
    Outcome o;
    const Grid coarse = Grid::regular(24.75, 0.5, 8, 44.6875, 0.625, 6);
    const Grid fine = Grid::regular(24.53125, 0.0625, 64, 44.40625, 0.0625, 60);
    const regrid::RegridPlan plan(coarse, fine);
    Image c(8, 6, 2.5), ramp(8, 6);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 6; ++j) ramp(i, j) = 0.3 * coarse.lat()[i] - 1.7 * coarse.lon()[j] + 4;
    const auto rc = regrid::bicubic_regrid(c, plan), rr = regrid::bicubic_regrid(ramp, plan);
    double wc = 0, wr = 0;
    for (std::size_t i = 0; i < 64; ++i)
        for (std::size_t j = 0; j < 60; ++j) {
            wc = std::max(wc, std::abs(rc(i, j) - 2.5));
            wr = std::max(wr, std::abs(rr(i, j) - (0.3 * fine.lat()[i] - 1.7 * fine.lon()[j] + 4)));
        }
    o.check(wc <= 1e-10, fmt("constant deviation %.3g", wc));
    o.check(wr <= 1e-10, fmt("ramp deviation %.3g", wr));
    const Image cell(2, 2, std::vector<double>{1, 2, 3, 4});
    const double avg = regrid::block_average(cell, Grid({0.0, 1.0}, {0.0, 1.0}), Grid({0.5}, {0.5}))(0, 0);
    o.check(avg == 2.5, fmt("block average %.17g", avg));
    if (o.pass) o.detail = fmt("constant %.1e, ramp %.1e, block average 2.5", wc, wr);
    return o;
}

Outcome leakage() {
    Outcome o;
    pipeline::SeasonWindow w;
    for (int i = 0; i < 292; ++i) w.target_days.push_back(Date{2005, 6, 1} + i);
    const auto s = pipeline::temporal_split(w);
    o.check(s.train.size() == 233 && s.val.size() == 29 && s.test.size() == 30,
            fmt("split %g/%g/%g", double(s.train.size()), double(s.val.size()), double(s.test.size())));
    o.check(s.train.back() < s.val.front() && s.val.back() < s.test.front(), "roles are not chronological");
    std::vector<pipeline::Patch> patches;
    for (const auto& d : w.target_days)
        for (const auto& org : pipeline::patch_origins(64, 60, {}))
            patches.push_back({org.y0, org.x0, d, 16, 16, {}, {}});
    std::size_t split_days = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto st = pipeline::group_by_day(patches, s, seed);
        std::map<Date, std::set<int>> roles;
        for (std::size_t i : st.train) roles[patches[i].day].insert(0);
        for (std::size_t i : st.validation) roles[patches[i].day].insert(1);
        for (std::size_t i : st.test) roles[patches[i].day].insert(2);
        for (const auto& [d, r] : roles) split_days += r.size() > 1;
        o.check(st.train.size() + st.validation.size() + st.test.size() == patches.size(), "patches lost");
    }
    o.check(split_days == 0, fmt("%g days split across streams", double(split_days)));
    if (o.pass) o.detail = "233/29/30, no day split across streams in 100 seeds";
    return o;
}

Outcome end_to_end() {
    const auto t0 = Clock::now();
    Outcome o;
    const auto r = demo::run_demo(demo::DemoConfig{});
    const double r2 = r.ridge.mean.r2;
    o.check(r2 >= 0.95, fmt("ridge test R2 %.4f", r2));
    o.check(r2 > r.persistence.mean.r2 && r2 > r.coarse_driver.mean.r2,
            fmt("R2 ridge %.4f vs persistence %.4f, driver %.4f", r2, r.persistence.mean.r2, r.coarse_driver.mean.r2));
    o.check(r.ridge.mean.rmse < r.persistence.mean.rmse && r.ridge.mean.rmse < r.coarse_driver.mean.rmse,
            fmt("RMSE ridge %.4f vs persistence %.4f, driver %.4f", r.ridge.mean.rmse, r.persistence.mean.rmse, r.coarse_driver.mean.rmse));
    o.check(r.rollout_days.size() == 10, "rollout is not 10 days");
    const bool rmse_between = demo::between(r.rollout_prediction.rmse[0], r.rollout_driver.rmse[0], r.rollout_truth.rmse[0]);
    const bool r2_between = demo::between(r.rollout_prediction.r2[0], r.rollout_driver.r2[0], r.rollout_truth.r2[0]);
    o.check(rmse_between, fmt("lag-1 RMSE %.4f not between driver %.4f and truth %.4f", r.rollout_prediction.rmse[0],
                              r.rollout_driver.rmse[0], r.rollout_truth.rmse[0]));
    o.check(r2_between, fmt("lag-1 R2 %.4f not between driver %.4f and truth %.4f", r.rollout_prediction.r2[0],
                            r.rollout_driver.r2[0], r.rollout_truth.r2[0]));
    const double secs = seconds_since(t0);
    o.check(secs < 60.0, fmt("runtime %.1f s", secs));
    o.detail += (o.detail.empty() ? "" : "; ") +
                fmt("R2 ridge %.4f, persistence %.4f, driver %.4f", r2, r.persistence.mean.r2, r.coarse_driver.mean.r2) +
                fmt("; lag-1 RMSE pred %.4f driver %.4f truth %.4f", r.rollout_prediction.rmse[0], r.rollout_driver.rmse[0],
                    r.rollout_truth.rmse[0]) +
                fmt("; %.1f s", secs);
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"stitch partition invariance", stitch_partition},
        {"stitch constant fidelity", stitch_constant},
        {"hann window", hann},
        {"wasserstein oracle agreement", wasserstein},
        {"variogram oracle", variogram},
        {"acf/pacf", acf_pacf},
        {"metric identities", metric_identities},
        {"regrid", regrid_checks},
        {"leakage guard", leakage},
        {"end-to-end synthetic world", end_to_end},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failed += !o.pass;
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
