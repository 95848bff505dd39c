#pragma once

// Predictor contract for day t+1: driver field, static geography, calendar
// labels and a lag context of fine fields. Reference predictors (persistence,
// regridded driver, ridge over per-pixel channels) plus an external-process
// bridge, and the day-by-day autoregressive rollout.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <limits>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "array2d.hpp"
#include "date.hpp"
#include "error.hpp"
#include "npy.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "raster.hpp"
#include "stitch.hpp"

namespace downscale::predictor {

enum class Kind { persistence, coarse_driver, ridge_patch, external };

inline std::string_view to_string(Kind k) {
    switch (k) {
        case Kind::persistence: return "persistence";
        case Kind::coarse_driver: return "coarse_driver";
        case Kind::ridge_patch: return "ridge_patch";
        case Kind::external: return "external";
    }
    return "persistence";
}

inline Kind parse_kind(std::string_view s) {
    if (s == "persistence") return Kind::persistence;
    if (s == "coarse_driver") return Kind::coarse_driver;
    if (s == "ridge_patch") return Kind::ridge_patch;
    if (s == "external") return Kind::external;
    throw ValidationError("unknown predictor kind '" + std::string(s) + "'");
}

inline constexpr int kDefaultTLag = 5;

/// Output squashing into (lo, hi): identity in the middle, tanh-shaped tails
/// of width knee * (hi - lo) that approach but never reach the bounds.
struct ClampBounds {
    double lo = -5.0;
    double hi = 5.0;
    double knee = 0.1;
};

inline double soft_clamp(double v, const ClampBounds& b) {
    const double m = b.knee * (b.hi - b.lo);
    const double top = b.hi - m, bottom = b.lo + m;
    // tanh rounds to +-1 for large arguments; step back inside the open interval
    if (v > top) return std::min(top + m * std::tanh((v - top) / m), std::nextafter(b.hi, b.lo));
    if (v < bottom) return std::max(bottom + m * std::tanh((v - bottom) / m), std::nextafter(b.lo, b.hi));
    return v;
}

/// Anchors for the calendar channels.
struct CalendarFrame {
    Date origin;  // first day of the data record
    int first_year = 0;
    int last_year = 0;

    double days_since_origin(const Date& d) const { return double(d - origin); }
    double normalized_year(const Date& d) const {
        return last_year == first_year ? 0.0 : double(d.year() - first_year) / double(last_year - first_year);
    }
};

/// Time-invariant channels on the fine grid, each z-scored over the grid.
struct StaticFields {
    Image elevation;
    Image latitude;
    Image longitude;

    static Image zscore(Image img) {
        double mean = 0.0;
        for (double v : img.flat()) mean += v;
        mean /= double(img.size());
        double ss = 0.0;
        for (double v : img.flat()) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / double(img.size()));
        for (double& v : img.flat()) v = sd > 0.0 ? (v - mean) / sd : 0.0;
        return img;
    }

    static StaticFields make(const Grid& grid, const Image& elevation) {
        downscale::detail::require(elevation.rows() == grid.n_lat() && elevation.cols() == grid.n_lon(),
                        "StaticFields: elevation shape does not match grid");
        Image lat(grid.n_lat(), grid.n_lon()), lon(grid.n_lat(), grid.n_lon());
        for (std::size_t i = 0; i < grid.n_lat(); ++i)
            for (std::size_t j = 0; j < grid.n_lon(); ++j) {
                lat(i, j) = grid.lat()[i];
                lon(i, j) = grid.lon()[j];
            }
        return {zscore(elevation), zscore(std::move(lat)), zscore(std::move(lon))};
    }
};

/// Everything the predictor sees for one target day, pixel-aligned on the fine grid.
struct PredictorInput {
    Date day;
    Image driver;  // coarse field for `day`, regridded
    const StaticFields* statics = nullptr;
    int season = 0;
    double days_since_origin = 0.0;
    double normalized_year = 0.0;
    std::vector<Image> context;  // last T_lag fine fields, oldest first
};

inline std::vector<std::string> channel_names(int t_lag) {
    std::vector<std::string> n = {"driver", "elevation", "latitude", "longitude",
                                  "season", "days_since_origin", "normalized_year"};
    for (int k = 1; k <= t_lag; ++k) n.push_back("context_" + std::to_string(k));
    return n;
}

/// Channel images in channel_names() order.
inline std::vector<Image> channel_images(const PredictorInput& in) {
    downscale::detail::require(in.statics != nullptr, "predictor input: static fields missing");
    const std::size_t H = in.driver.rows(), W = in.driver.cols();
    for (const Image* img : {&in.statics->elevation, &in.statics->latitude, &in.statics->longitude})
        downscale::detail::require(img->rows() == H && img->cols() == W, "predictor input: static channel shape mismatch");
    for (const auto& c : in.context)
        downscale::detail::require(c.rows() == H && c.cols() == W, "predictor input: context channel shape mismatch");
    std::vector<Image> ch = {in.driver,
                             in.statics->elevation,
                             in.statics->latitude,
                             in.statics->longitude,
                             Image(H, W, double(in.season)),
                             Image(H, W, in.days_since_origin),
                             Image(H, W, in.normalized_year)};
    for (const auto& c : in.context) ch.push_back(c);
    return ch;
}

/// Linear map shared by all pixels: y = intercept + sum_c coef[c] * x_c.
struct RidgeModel {
    std::vector<std::string> channels;
    std::vector<double> coef;
    double intercept = 0.0;
    double lambda = 0.0;
};

struct PredictorSpec {
    Kind kind = Kind::persistence;
    int t_lag = kDefaultTLag;
    double lambda = 1e-3;
    int halo = stitch::kDefaultHalo;
    int stride = 2;        // inference stride
    int train_stride = 8;  // training patch stride
    double eps = stitch::kDefaultEps;
    std::optional<ClampBounds> clamp;
    std::optional<RidgeModel> ridge;
    std::string command;                 // external kind
    std::filesystem::path exchange_dir;  // external kind

    pipeline::PatchSpec inference_patches() const {
        return {pipeline::kPatchSize, pipeline::kPatchSize, stride, halo};
    }
};

/// Fits the ridge map on patch pixels. Every patch must carry the feature
/// channels plus one channel named `target_channel`. Features are z-scored
/// internally and the penalty is lambda * ||beta||^2 on the mean squared
/// error scale; the intercept is not penalized. Coefficients are reported in
/// original channel units.
inline RidgeModel fit_ridge_patch(std::span<const pipeline::Patch> patches, double lambda,
                                  std::string_view target_channel = "target") {
    downscale::detail::require(!patches.empty(), "fit_ridge_patch: no training patches");
    downscale::detail::require(lambda >= 0.0, "fit_ridge_patch: lambda must be non-negative");
    const auto& names = patches.front().channels;
    const auto tgt_it = std::find(names.begin(), names.end(), target_channel);
    downscale::detail::require(tgt_it != names.end(), "fit_ridge_patch: patches have no target channel");
    const std::size_t tgt = std::size_t(tgt_it - names.begin());
    std::vector<std::size_t> feat;
    for (std::size_t c = 0; c < names.size(); ++c)
        if (c != tgt) feat.push_back(c);
    const std::size_t p = feat.size();
    downscale::detail::require(patches.size() >= p, "fit_ridge_patch: fewer training patches than channels");
    const std::size_t px = std::size_t(patches.front().height * patches.front().width);

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(Eigen::Index(p));
    double ymean = 0.0;
    std::size_t n = 0;
    for (const auto& pt : patches) {
        downscale::detail::require(pt.channels == names, "fit_ridge_patch: patches carry different channels");
        for (std::size_t i = 0; i < px; ++i) {
            for (std::size_t f = 0; f < p; ++f) mean[Eigen::Index(f)] += pt.values[feat[f] * px + i];
            ymean += pt.values[tgt * px + i];
            ++n;
        }
    }
    mean /= double(n);
    ymean /= double(n);
    Eigen::VectorXd scale = Eigen::VectorXd::Zero(Eigen::Index(p));
    for (const auto& pt : patches)
        for (std::size_t i = 0; i < px; ++i)
            for (std::size_t f = 0; f < p; ++f) {
                const double d = pt.values[feat[f] * px + i] - mean[Eigen::Index(f)];
                scale[Eigen::Index(f)] += d * d;
            }
    for (Eigen::Index f = 0; f < Eigen::Index(p); ++f) {
        scale[f] = std::sqrt(scale[f] / double(n));
        if (!(scale[f] > 0.0)) scale[f] = 1.0;  // constant channel: column of zeros after centring
    }
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(Eigen::Index(p), Eigen::Index(p));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(Eigen::Index(p));
    Eigen::VectorXd x(static_cast<Eigen::Index>(p));
    for (const auto& pt : patches)
        for (std::size_t i = 0; i < px; ++i) {
            for (std::size_t f = 0; f < p; ++f)
                x[Eigen::Index(f)] = (pt.values[feat[f] * px + i] - mean[Eigen::Index(f)]) / scale[Eigen::Index(f)];
            gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
            rhs += x * (pt.values[tgt * px + i] - ymean);
        }
    gram = gram.selfadjointView<Eigen::Lower>();
    gram /= double(n);
    rhs /= double(n);
    gram.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    // LDLT's rcond() skips zero pivots, so the pivot spread is checked as well
    const auto d = ldlt.vectorD().cwiseAbs();
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-12 || !(d.minCoeff() >= 1e-12 * d.maxCoeff()))
        throw SingularSystemError("fit_ridge_patch: normal equations are singular (collinear or constant "
                                  "channels); use lambda > 0");
    const Eigen::VectorXd beta = ldlt.solve(rhs);

    RidgeModel m;
    m.lambda = lambda;
    m.intercept = ymean;
    for (std::size_t f = 0; f < p; ++f) {
        const double b = beta[Eigen::Index(f)] / scale[Eigen::Index(f)];
        m.channels.push_back(names[feat[f]]);
        m.coef.push_back(b);
        m.intercept -= b * mean[Eigen::Index(f)];
    }
    return m;
}

/// Default clamp: the training target range.
inline ClampBounds clamp_from_patches(std::span<const pipeline::Patch> patches, std::string_view target_channel = "target",
                                      double knee = 0.1) {
    const auto& names = patches.front().channels;
    const std::size_t tgt = std::size_t(std::find(names.begin(), names.end(), target_channel) - names.begin());
    downscale::detail::require(tgt < names.size(), "clamp_from_patches: no target channel");
    const std::size_t px = std::size_t(patches.front().height * patches.front().width);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& pt : patches)
        for (std::size_t i = 0; i < px; ++i) {
            lo = std::min(lo, pt.values[tgt * px + i]);
            hi = std::max(hi, pt.values[tgt * px + i]);
        }
    downscale::detail::require(hi > lo, "clamp_from_patches: flat training targets");
    return {lo, hi, knee};
}

struct DayPrediction {
    Image field;
    Mask covered;  // stitch coverage; all ones for full-field kinds
};

namespace detail {

inline void require_kind_inputs(const PredictorInput& in, const PredictorSpec& spec) {
    downscale::detail::require(!in.driver.empty(), "predict_day: missing driver channel");
    if (spec.kind == Kind::persistence)
        downscale::detail::require(!in.context.empty(), "predict_day: persistence needs a context field");
    if (spec.kind == Kind::ridge_patch || spec.kind == Kind::external) {
        downscale::detail::require(in.statics != nullptr, "predict_day: missing static channels");
        downscale::detail::require(in.context.size() == std::size_t(spec.t_lag),
                                   "predict_day: context length does not match t_lag");
    }
    if (spec.kind == Kind::ridge_patch) downscale::detail::require(spec.ridge.has_value(), "predict_day: ridge model not fitted");
}

// Stitches patch predictions in their fixed order. Pixels without Hann weight
// (the outermost image ring, where the taper is zero) take the plain mean of
// the patch values covering them.
inline DayPrediction stitch_patches(std::span<const stitch::PredictedPatch> preds, std::size_t H, std::size_t W,
                                    const PredictorSpec& spec) {
    stitch::StitchAccumulator acc(H, W, pipeline::kPatchSize, pipeline::kPatchSize, spec.halo, spec.eps);
    acc.accumulate(preds);
    auto res = acc.finalize();
    Image fsum(H, W), fcount(H, W);
    for (const auto& p : preds)
        for (std::size_t y = 0; y < p.values.rows(); ++y)
            for (std::size_t x = 0; x < p.values.cols(); ++x) {
                fsum(std::size_t(p.y0) + y, std::size_t(p.x0) + x) += p.values(y, x);
                fcount(std::size_t(p.y0) + y, std::size_t(p.x0) + x) += 1.0;
            }
    for (std::size_t i = 0; i < res.image.size(); ++i)
        if (!res.covered.flat()[i] && fcount.flat()[i] > 0) res.image.flat()[i] = fsum.flat()[i] / fcount.flat()[i];
    return {std::move(res.image), std::move(res.covered)};
}

inline std::string shell_quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

}  // namespace detail

/// Writes channel-stacked patches (N x C x 16 x 16, float32) and the index
/// describing them, as exchanged with an external predictor.
inline void write_exchange_inputs(const std::filesystem::path& inputs, const std::filesystem::path& index,
                                  const Date& day, std::span<const pipeline::PatchOrigin> origins,
                                  std::span<const Image> channels, std::span<const std::string> names,
                                  std::size_t img_h, std::size_t img_w) {
    const int P = pipeline::kPatchSize;
    std::vector<double> buf;
    buf.reserve(origins.size() * channels.size() * std::size_t(P * P));
    nlohmann::json idx;
    idx["patch_height"] = P;
    idx["patch_width"] = P;
    idx["image_height"] = img_h;
    idx["image_width"] = img_w;
    idx["channels"] = std::vector<std::string>(names.begin(), names.end());
    idx["space"] = "standardized";
    idx["patches"] = nlohmann::json::array();
    for (const auto& o : origins) {
        for (const auto& c : channels)
            for (int y = 0; y < P; ++y)
                for (int x = 0; x < P; ++x) buf.push_back(c(std::size_t(o.y0 + y), std::size_t(o.x0 + x)));
        idx["patches"].push_back({{"day", day.iso()}, {"y0", o.y0}, {"x0", o.x0}});
    }
    const std::size_t shape[4] = {origins.size(), channels.size(), std::size_t(P), std::size_t(P)};
    npy::write(inputs, npy::Dtype::f4, shape, buf);
    std::ofstream(index) << idx.dump(2) << "\n";
}

/// Predicts the full fine field for `in.day`.
inline DayPrediction predict_day(const PredictorInput& in, const PredictorSpec& spec, unsigned threads = 1) {
    detail::require_kind_inputs(in, spec);
    const std::size_t H = in.driver.rows(), W = in.driver.cols();
    if (spec.kind == Kind::persistence) {
        downscale::detail::require(in.context.back().rows() == H && in.context.back().cols() == W,
                        "predict_day: context shape mismatch");
        return {in.context.back(), Mask(H, W, 1)};
    }
    if (spec.kind == Kind::coarse_driver) return {in.driver, Mask(H, W, 1)};

    const auto channels = channel_images(in);
    const auto names = channel_names(spec.t_lag);
    const auto origins = pipeline::patch_origins(H, W, spec.inference_patches(), true);
    const int P = pipeline::kPatchSize;
    std::vector<stitch::PredictedPatch> preds(origins.size());

    if (spec.kind == Kind::ridge_patch) {
        const auto& m = *spec.ridge;
        downscale::detail::require(m.channels == names, "predict_day: ridge model channels do not match the input layout");
        parallel_for(origins.size(), threads, [&](std::size_t k) {
            const auto& o = origins[k];
            Image v(static_cast<std::size_t>(P), static_cast<std::size_t>(P));
            for (int y = 0; y < P; ++y)
                for (int x = 0; x < P; ++x) {
                    double s = m.intercept;
                    for (std::size_t c = 0; c < channels.size(); ++c)
                        s += m.coef[c] * channels[c](std::size_t(o.y0 + y), std::size_t(o.x0 + x));
                    v(std::size_t(y), std::size_t(x)) = spec.clamp ? soft_clamp(s, *spec.clamp) : s;
                }
            preds[k] = {o.y0, o.x0, std::move(v)};
        });
    } else {
        downscale::detail::require(!spec.command.empty(), "predict_day: external predictor needs a command");
        const auto dir = spec.exchange_dir.empty() ? std::filesystem::temp_directory_path() : spec.exchange_dir;
        std::filesystem::create_directories(dir);
        const auto inputs = dir / ("inputs_" + in.day.iso() + ".npy");
        const auto index = dir / ("patches_" + in.day.iso() + ".json");
        const auto outputs = dir / ("preds_" + in.day.iso() + ".npy");
        std::filesystem::remove(outputs);
        write_exchange_inputs(inputs, index, in.day, origins, channels, names, H, W);
        const std::string cmd = spec.command + " " + detail::shell_quote(inputs.string()) + " " +
                                detail::shell_quote(index.string()) + " " + detail::shell_quote(outputs.string());
        const int rc = std::system(cmd.c_str());
        if (rc != 0) throw std::runtime_error("external predictor failed (exit status " + std::to_string(rc) + ")");
        const auto arr = npy::read(outputs);
        const std::vector<std::size_t> want = {origins.size(), std::size_t(P), std::size_t(P)};
        downscale::detail::require(arr.shape == want, "external predictor: preds array must be N x 16 x 16");
        for (std::size_t k = 0; k < origins.size(); ++k) {
            Image v(static_cast<std::size_t>(P), static_cast<std::size_t>(P));
            for (std::size_t i = 0; i < v.size(); ++i) {
                const double s = arr.data[k * v.size() + i];
                v.flat()[i] = spec.clamp ? soft_clamp(s, *spec.clamp) : s;
            }
            preds[k] = {origins[k].y0, origins[k].x0, std::move(v)};
        }
    }
    return detail::stitch_patches(preds, H, W, spec);
}

/// The last T_lag fine fields, oldest first. Length never changes after construction.
class RolloutState {
public:
    RolloutState(std::vector<Image> initial, Date newest)
        : buffer_(initial.begin(), initial.end()), newest_(newest) {
        downscale::detail::require(!buffer_.empty(), "RolloutState: empty context");
    }

    /// Appends the field for the day after `newest()` and drops the oldest.
    void push(Image field) {
        buffer_.pop_front();
        buffer_.push_back(std::move(field));
        newest_ = newest_ + 1;
    }

    std::size_t size() const { return buffer_.size(); }
    Date newest() const { return newest_; }
    std::vector<Image> context() const { return {buffer_.begin(), buffer_.end()}; }

private:
    std::deque<Image> buffer_;
    Date newest_;
};

/// Seeds the state with the T_lag true fields ending on `last_true_day`.
inline RolloutState initial_state(const FieldStack& truth, Date last_true_day, int t_lag) {
    std::vector<Image> ctx;
    for (int k = t_lag - 1; k >= 0; --k) {
        const auto idx = truth.index_of(last_true_day - k);
        if (!idx) throw ValidationError("rollout: true context day " + (last_true_day - k).iso() + " missing");
        ctx.push_back(truth.image(*idx));
    }
    return RolloutState(std::move(ctx), last_true_day);
}

enum class ContextMode { autoregressive, overlap };

inline PredictorInput make_input(const Date& day, Image driver, const StaticFields& statics,
                                 const CalendarFrame& cal, std::vector<Image> context) {
    PredictorInput in;
    in.day = day;
    in.driver = std::move(driver);
    in.statics = &statics;
    in.season = pipeline::season_index(pipeline::season_of(day));
    in.days_since_origin = cal.days_since_origin(day);
    in.normalized_year = cal.normalized_year(day);
    in.context = std::move(context);
    return in;
}

/// Predicts `horizon` consecutive days after state.newest(). In autoregressive
/// mode each prediction re-enters the context; in overlap mode the true field
/// of the day does (and `truth` must cover the horizon).
inline FieldStack rollout(RolloutState& state, const FieldStack& drivers, int horizon, const StaticFields& statics,
                          const CalendarFrame& cal, const PredictorSpec& spec,
                          ContextMode mode = ContextMode::autoregressive, const FieldStack* truth = nullptr,
                          unsigned threads = 1) {
    downscale::detail::require(horizon >= 1, "rollout: horizon must be positive");
    downscale::detail::require(state.size() == std::size_t(spec.t_lag), "rollout: state length does not match t_lag");
    downscale::detail::require(mode == ContextMode::autoregressive || truth != nullptr, "rollout: overlap mode needs true fields");
    std::vector<Date> days;
    std::vector<Image> out;
    for (int u = 0; u < horizon; ++u) {
        const Date day = state.newest() + 1;
        const auto di = drivers.index_of(day);
        if (!di) throw ValidationError("rollout: driver gap, no driver for " + day.iso());
        auto pred = predict_day(make_input(day, drivers.image(*di), statics, cal, state.context()), spec, threads);
        if (mode == ContextMode::overlap) {
            const auto ti = truth->index_of(day);
            if (!ti) throw ValidationError("rollout: overlap mode has no true field for " + day.iso());
            state.push(truth->image(*ti));
        } else {
            state.push(pred.field);
        }
        days.push_back(day);
        out.push_back(std::move(pred.field));
    }
    return FieldStack::from_images(drivers.grid(), std::move(days), out, drivers.space(), "prediction");
}

/// Training patches (stride spec.train_stride) for the given days: predictor
/// channels from true context plus a `target` channel. Days lacking a full
/// context or driver are skipped.
inline std::vector<pipeline::Patch> training_patches(const FieldStack& truth, const FieldStack& drivers,
                                                     const StaticFields& statics, const CalendarFrame& cal,
                                                     std::span<const Date> days, const PredictorSpec& spec) {
    std::vector<pipeline::Patch> out;
    auto names = channel_names(spec.t_lag);
    names.push_back("target");
    const pipeline::PatchSpec ps{pipeline::kPatchSize, pipeline::kPatchSize, spec.train_stride, 0};
    for (const auto& day : days) {
        const auto ti = truth.index_of(day);
        const auto di = drivers.index_of(day);
        if (!ti || !di) continue;
        std::vector<Image> ctx;
        bool complete = true;
        for (int k = spec.t_lag; k >= 1 && complete; --k) {
            const auto ci = truth.index_of(day - k);
            if (!ci) complete = false;
            else ctx.push_back(truth.image(*ci));
        }
        if (!complete) continue;
        auto channels = channel_images(make_input(day, drivers.image(*di), statics, cal, std::move(ctx)));
        channels.push_back(truth.image(*ti));
        auto patches = pipeline::extract_patches(channels, names, ps, day);
        out.insert(out.end(), std::make_move_iterator(patches.begin()), std::make_move_iterator(patches.end()));
    }
    return out;
}

}  // namespace downscale::predictor
