// downscale: command-line front end. Every subcommand writes its outputs plus
// manifest.json next to them. Exit status: 0 success, 2 invalid input or
// usage, 1 internal error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "downscale.hpp"

namespace fs = std::filesystem;
using namespace downscale;
using nlohmann::json;

namespace {

struct Common {
    unsigned threads = 0;  // 0: DOWNSCALE_THREADS or 1
    unsigned resolved() const { return threads > 0 ? threads : threads_from_env(); }
};

fs::path out_dir(const fs::path& out) {
    const auto dir = out.parent_path();
    if (!dir.empty()) fs::create_directories(dir);
    return dir.empty() ? fs::path(".") : dir;
}

void add_stack_input(Manifest& m, const fs::path& p) {
    m.add_input(p);
    if (fs::exists(npy::meta_path(p))) m.add_input(npy::meta_path(p));
    if (fs::exists(npy::mask_path(p))) m.add_input(npy::mask_path(p));
}

void finish(Manifest& m, const fs::path& dir, const Common& c) {
    m.set("threads", c.resolved());
    m.write(dir / "manifest.json");
}

std::vector<double> parse_ratios(const std::string& s) {
    std::vector<double> r;
    std::stringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        try {
            std::size_t used = 0;
            r.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ValidationError("--ratios: not a number: '" + tok + "'");
        }
    }
    if (r.size() != 3) throw ValidationError("--ratios needs three comma-separated values");
    return r;
}

// ---------------------------------------------------------------- regrid
void cmd_regrid(CLI::App& app, Common& c, std::function<int()>& run) {
    auto* sub = app.add_subcommand("regrid", "Regrid a stack onto a target grid (bicubic or block mean)");
    static std::string method, src, target, out;
    sub->add_option("--method", method, "bicubic | blockmean")->required()->check(CLI::IsMember({"bicubic", "blockmean"}));
    sub->add_option("--src", src, "source stack (.npy with .meta.json)")->required();
    sub->add_option("--target-grid", target, "JSON with lat/lon arrays (a .meta.json works)")->required();
    sub->add_option("--out", out, "output stack (.npy)")->required();
    sub->callback([&] {
        run = [&] {
            const auto stack = npy::load_stack(src);
            const auto grid = npy::grid_from_json(npy::read_json(target));
            const FieldStack res = method == "bicubic"
                                       ? regrid::bicubic_regrid(stack, regrid::RegridPlan(stack.grid(), grid))
                                       : regrid::block_average(stack, grid);
            const auto dir = out_dir(out);
            npy::save_stack(out, res);
            Manifest m("regrid");
            add_stack_input(m, src);
            m.add_input(target);
            m.set("method", method);
            m.set("space", std::string(to_string(stack.space())));
            m.add_output(out);
            finish(m, dir, c);
            return 0;
        };
    });
}

// ---------------------------------------------------------------- split
void cmd_split(CLI::App& app, Common& c, std::function<int()>& run) {
    auto* sub = app.add_subcommand("split", "Seasonal window and chronological train/val/test split");
    static std::string season = "JJA", ratios = "0.8,0.1,0.1", src, start, end, out;
    static double holdout = 0.0;
    sub->add_option("--season", season, "DJF | MAM | JJA | SON")->capture_default_str();
    sub->add_option("--ratios", ratios, "train,val,test fractions")->capture_default_str();
    sub->add_option("--holdout", holdout, "fraction of train days held out at the end of train")->capture_default_str();
    sub->add_option("--src", src, "take the calendar from this stack's dates");
    sub->add_option("--start", start, "calendar start (YYYY-MM-DD), with --end");
    sub->add_option("--end", end, "calendar end (YYYY-MM-DD), inclusive");
    sub->add_option("--out", out, "split.json")->required();
    sub->callback([&] {
        run = [&] {
            std::vector<Date> cal;
            if (!src.empty()) {
                detail::require(start.empty() && end.empty(), "split: give either --src or --start/--end");
                cal = npy::load_stack(src).dates();
            } else {
                detail::require(!start.empty() && !end.empty(), "split: need --src or both --start and --end");
                for (Date d = Date::parse(start); d <= Date::parse(end); ++d) cal.push_back(d);
            }
            const auto r = parse_ratios(ratios);
            const auto window = pipeline::build_season_windows(cal, pipeline::parse_season(season));
            const auto split = pipeline::temporal_split(window, {r[0], r[1], r[2]}, holdout);
            json j = reports::to_json(split);
            j["season"] = season;
            j["buffer_days"] = reports::dates_json(window.buffer_days);
            const auto dir = out_dir(out);
            std::ofstream f(out);
            if (!f) throw ValidationError("cannot write " + out);
            f << j.dump(2) << "\n";
            Manifest m("split");
            if (!src.empty()) add_stack_input(m, src);
            m.set("season", season);
            m.set("ratios", r);
            m.set("holdout", holdout);
            m.set("start", start);
            m.set("end", end);
            m.add_output(out);
            finish(m, dir, c);
            return 0;
        };
    });
}

// ---------------------------------------------------------------- patch
void cmd_patch(CLI::App& app, Common& c, std::function<int()>& run) {
    auto* sub = app.add_subcommand("patch", "Cut 16x16 sliding-window patches from every day of a stack");
    static std::string src, out, index;
    static int stride = 8, halo = 0;
    static bool far_edge = false;
    sub->add_option("--src", src, "input stack")->required();
    sub->add_option("--stride", stride, "window stride")->capture_default_str();
    sub->add_option("--halo", halo, "halo recorded with the patches")->capture_default_str();
    sub->add_flag("--cover-far-edge", far_edge, "add a final window flush with the bottom/right edge");
    sub->add_option("--out", out, "patches .npy (N x 16 x 16)")->required();
    sub->add_option("--index", index, "patch index .json")->required();
    sub->callback([&] {
        run = [&] {
            const auto stack = npy::load_stack(src);
            const pipeline::PatchSpec spec{pipeline::kPatchSize, pipeline::kPatchSize, stride, halo};
            std::vector<double> values;
            json idx;
            idx["patch_height"] = spec.height;
            idx["patch_width"] = spec.width;
            idx["image_height"] = stack.rows();
            idx["image_width"] = stack.cols();
            idx["stride"] = stride;
            idx["halo"] = halo;
            idx["space"] = std::string(to_string(stack.space()));
            idx["lat"] = stack.grid().lat();
            idx["lon"] = stack.grid().lon();
            idx["patches"] = json::array();
            for (std::size_t k = 0; k < stack.n_layers(); ++k) {
                const Date day = stack.is_static() ? Date{} : stack.dates()[k];
                const Image img = stack.image(k);
                const std::string name = stack.var_name();
                for (const auto& p : pipeline::extract_patches(std::span<const Image>(&img, 1),
                                                               std::span<const std::string>(&name, 1), spec, day,
                                                               far_edge)) {
                    values.insert(values.end(), p.values.begin(), p.values.end());
                    json row = {{"y0", p.y0}, {"x0", p.x0}};
                    row["day"] = stack.is_static() ? json(nullptr) : json(day.iso());
                    idx["patches"].push_back(row);
                }
            }
            const std::size_t shape[3] = {idx["patches"].size(), std::size_t(spec.height), std::size_t(spec.width)};
            const auto dir = out_dir(out);
            out_dir(index);
            npy::write(out, npy::Dtype::f4, shape, values);
            std::ofstream(index) << idx.dump(2) << "\n";
            Manifest m("patch");
            add_stack_input(m, src);
            m.set("stride", stride);
            m.set("halo", halo);
            m.set("cover_far_edge", far_edge);
            m.add_output(out);
            m.add_output(index);
            finish(m, dir, c);
            return 0;
        };
    });
}

// ---------------------------------------------------------------- stitch
void cmd_stitch(CLI::App& app, Common& c, std::function<int()>& run) {
    auto* sub = app.add_subcommand("stitch", "Blend predicted patches into full images (halo + Hann taper)");
    static std::string patches, index, out, mask_out;
    static int h = stitch::kDefaultHalo;
    static double eps = stitch::kDefaultEps;
    sub->add_option("--patches", patches, "N x 16 x 16 .npy of patch values")->required();
    sub->add_option("--index", index, "patch index .json: patches[{day, y0, x0}], image size, optional lat/lon")->required();
    sub->set_help_flag("--help", "Print this help message and exit");  // frees the name "h" for the halo option
    sub->add_option("--h", h, "halo width")->capture_default_str();
    sub->add_option("--eps", eps, "weight floor")->capture_default_str();
    sub->add_option("--out", out, "stitched stack .npy")->required();
    sub->add_option("--mask-out", mask_out, "coverage mask .npy (1 where Z >= eps)");
    sub->callback([&] {
        run = [&] {
            const auto arr = npy::read(patches);
            const json idx = npy::read_json(index);
            detail::require(arr.shape.size() == 3, "stitch: patches must be an N x H x W array");
            const int ph = int(arr.shape[1]), pw = int(arr.shape[2]);
            const auto& rows = idx.at("patches");
            detail::require(rows.size() == arr.shape[0], "stitch: index and patch array disagree on patch count");
            std::size_t H = idx.value("image_height", std::size_t(0)), W = idx.value("image_width", std::size_t(0));
            std::map<Date, std::vector<stitch::PredictedPatch>> by_day;
            bool dated = false, undated = false;
            const std::size_t px = std::size_t(ph * pw);
            for (std::size_t k = 0; k < rows.size(); ++k) {
                const auto& r = rows[k];
                const int y0 = r.at("y0").get<int>(), x0 = r.at("x0").get<int>();
                detail::require(y0 >= 0 && x0 >= 0, "stitch: negative patch origin");
                Date day{};
                if (r.contains("day") && !r.at("day").is_null()) {
                    day = Date::parse(r.at("day").get<std::string>());
                    dated = true;
                } else {
                    undated = true;
                }
                Image v(static_cast<std::size_t>(ph), static_cast<std::size_t>(pw));
                std::copy(arr.data.begin() + std::ptrdiff_t(k * px), arr.data.begin() + std::ptrdiff_t((k + 1) * px),
                          v.flat().begin());
                by_day[day].push_back({y0, x0, std::move(v)});
                if (!idx.contains("image_height")) H = std::max(H, std::size_t(y0 + ph));
                if (!idx.contains("image_width")) W = std::max(W, std::size_t(x0 + pw));
            }
            detail::require(!(dated && undated), "stitch: index mixes dated and undated patches");
            for (const auto& [day, list] : by_day)
                for (const auto& p : list)
                    detail::require(std::size_t(p.y0 + ph) <= H && std::size_t(p.x0 + pw) <= W,
                                    "stitch: patch extends beyond the image");
            Grid grid;
            if (idx.contains("lat") && idx.contains("lon")) grid = npy::grid_from_json(idx);
            else grid = Grid::regular(0.0, 1.0, H, 0.0, 1.0, W);  // pixel-index coordinates
            detail::require(grid.n_lat() == H && grid.n_lon() == W, "stitch: index lat/lon do not match image size");
            const Space space = parse_space(idx.value("space", std::string("raw")));
            std::vector<Date> days;
            std::vector<Image> images;
            std::vector<double> cover;
            for (const auto& [day, list] : by_day) {
                stitch::StitchAccumulator acc(H, W, ph, pw, h, eps);
                acc.accumulate(list);
                auto res = acc.finalize();
                if (dated) days.push_back(day);
                images.push_back(std::move(res.image));
                cover.insert(cover.end(), res.covered.vec().begin(), res.covered.vec().end());
            }
            const FieldStack stack = dated ? FieldStack::from_images(grid, days, images, space, "stitched")
                                           : FieldStack::static_field(grid, images.front(), space, "stitched");
            const auto dir = out_dir(out);
            npy::save_stack(out, stack);
            Manifest m("stitch");
            m.add_input(patches);
            m.add_input(index);
            m.set("h", h);
            m.set("eps", eps);
            m.set("space", std::string(to_string(space)));
            m.add_output(out);
            if (!mask_out.empty()) {
                out_dir(mask_out);
                std::vector<std::size_t> shape;
                if (dated) shape.push_back(days.size());
                shape.push_back(H);
                shape.push_back(W);
                npy::write(mask_out, npy::Dtype::u1, shape, cover);
                m.add_output(mask_out);
            }
            finish(m, dir, c);
            return 0;
        };
    });
}

// ---------------------------------------------------------------- wd
void cmd_wd(CLI::App& app, Common& c, std::function<int()>& run) {
    auto* sub = app.add_subcommand("wd", "Per-day 1-Wasserstein distance after joint log-min-max normalization");
    static std::string x, y, out;
    static int bins = similarity::kDefaultBins;
    static double eps = kDefaultFloorEps;
    sub->add_option("--x", x, "first stack (raw or log10)")->required();
    sub->add_option("--y", y, "second stack, same grid and dates")->required();
    sub->add_option("--bins", bins, "histogram bins on [0,1]")->capture_default_str();
    sub->add_option("--eps", eps, "floor before log10 (raw inputs)")->capture_default_str();
    sub->add_option("--out", out, "wd.json | wd.csv")->required();
    sub->callback([&] {
        run = [&] {
            const auto rep = similarity::wd_report(npy::load_stack(x), npy::load_stack(y), bins, eps, c.resolved());
            const auto dir = out_dir(out);
            reports::write_report(out, reports::to_json(rep), reports::to_csv(rep));
            Manifest m("wd");
            add_stack_input(m, x);
            add_stack_input(m, y);
            m.set("bins", bins);
            m.set("eps", eps);
            m.add_output(out);
            finish(m, dir, c);
            return 0;
        };
    });
}

// ---------------------------------------------------------------- variogram
void cmd_variogram(CLI::App& app, Common& c, std::function<int()>& run) {
    auto* sub = app.add_subcommand("variogram", "Empirical semivariogram (day-averaged) with a spherical fit");
    static std::string src, day, out;
    static std::size_t pairs = geostat::kDefaultPairs;
    static double max_km = geostat::kDefaultMaxKm;
    static int bins = geostat::kDefaultBins;
    static std::uint64_t seed = 0;
    sub->add_option("--src", src, "input stack")->required();
    sub->add_option("--pairs", pairs, "pixel pairs to sample")->capture_default_str();
    sub->add_option("--max-km", max_km, "distance cap")->capture_default_str();
    sub->add_option("--bins", bins, "equal-width distance bins over (0, max-km]")->capture_default_str();
    sub->add_option("--seed", seed, "pair sampling seed")->capture_default_str();
    sub->add_option("--day", day, "use a single day (YYYY-MM-DD) instead of the day average");
    sub->add_option("--out", out, "report .json | .csv")->required();
    sub->callback([&] {
        run = [&] {
            auto stack = npy::load_stack(src);
            if (!day.empty()) {
                const auto k = stack.index_of(Date::parse(day));
                if (!k) throw ValidationError("variogram: day " + day + " not in stack");
                const std::size_t sel[1] = {*k};
                stack = stack.select(sel);
            }
            const auto sample = geostat::sample_pairs(stack.grid(), geostat::common_valid_mask(stack), pairs, max_km, seed);
            const auto vg = geostat::variogram_stack(stack, sample, bins, c.resolved());
            const auto fit = geostat::fit_spherical(vg);
            const auto dir = out_dir(out);
            json j = reports::to_json(vg, fit);
            j["pairs_sampled"] = sample.pairs.size();
            j["exhaustive"] = sample.exhaustive;
            reports::write_report(out, j, reports::to_csv(vg, fit));
            Manifest m("variogram");
            add_stack_input(m, src);
            m.set("pairs", pairs);
            m.set("max_km", max_km);
            m.set("bins", bins);
            m.set("seed", seed);
            m.set("day", day);
            m.add_output(out);
            finish(m, dir, c);
            return 0;
        };
    });
}

// ---------------------------------------------------------------- acf
void cmd_acf(CLI::App& app, Common& c, std::function<int()>& run) {
    auto* sub = app.add_subcommand("acf", "ACF and PACF of the daily regional-mean series");
    static std::string src, out;
    static int lags = temporal::kDefaultAcfLags;
    sub->add_option("--src", src, "input stack")->required();
    sub->add_option("--lags", lags, "maximum lag K")->capture_default_str();
    sub->add_option("--out", out, "report .json | .csv")->required();
    sub->callback([&] {
        run = [&] {
            const auto series = temporal::regional_mean_series(npy::load_stack(src));
            const auto a = temporal::acf_pacf(series, lags);
            const auto dir = out_dir(out);
            reports::write_report(out, reports::to_json(a), reports::to_csv(a));
            Manifest m("acf");
            add_stack_input(m, src);
            m.set("lags", lags);
            m.add_output(out);
            finish(m, dir, c);
            return 0;
        };
    });
}

// ---------------------------------------------------------------- lagmetrics
void cmd_lagmetrics(CLI::App& app, Common& c, std::function<int()>& run) {
    auto* sub = app.add_subcommand("lagmetrics", "Image-wise RMSE and R^2 between day t and day t - lag");
    static std::string src, out;
    static int max_lag = temporal::kDefaultMaxLag;
    sub->add_option("--src", src, "input stack")->required();
    sub->add_option("--max-lag", max_lag, "largest lag")->capture_default_str();
    sub->add_option("--out", out, "report .json | .csv")->required();
    sub->callback([&] {
        run = [&] {
            const auto curve = temporal::lag_metrics(npy::load_stack(src), max_lag);
            const auto dir = out_dir(out);
            reports::write_report(out, reports::to_json(curve), reports::to_csv(curve));
            Manifest m("lagmetrics");
            add_stack_input(m, src);
            m.set("max_lag", max_lag);
            m.add_output(out);
            finish(m, dir, c);
            return 0;
        };
    });
}

// ---------------------------------------------------------------- eval
void cmd_eval(CLI::App& app, Common& c, std::function<int()>& run) {
    auto* sub = app.add_subcommand("eval", "Per-day MAE, RMSE, R^2, NSE and KGE of a prediction stack");
    static std::string pred, truth, out;
    sub->add_option("--pred", pred, "predicted stack")->required();
    sub->add_option("--truth", truth, "reference stack, same grid and dates")->required();
    sub->add_option("--out", out, "report .json | .csv")->required();
    sub->callback([&] {
        run = [&] {
            const auto rep = metrics::eval_metrics(npy::load_stack(pred), npy::load_stack(truth), c.resolved());
            const auto dir = out_dir(out);
            reports::write_report(out, reports::to_json(rep), reports::to_csv(rep));
            Manifest m("eval");
            add_stack_input(m, pred);
            add_stack_input(m, truth);
            m.add_output(out);
            finish(m, dir, c);
            return 0;
        };
    });
}

// ---------------------------------------------------------------- rollout
void cmd_rollout(CLI::App& app, Common& c, std::function<int()>& run) {
    auto* sub = app.add_subcommand("rollout", "Day-by-day prediction past the last true day (or over known days)");
    static std::string config_path, truth_path, driver_path, elev_path, split_path, start, mode = "autoregressive", out;
    static int horizon = 10;
    sub->add_option("--config", config_path, "key = value predictor config")->required();
    sub->add_option("--truth", truth_path, "fine stack (raw AOD) supplying context and training targets")->required();
    sub->add_option("--driver", driver_path, "coarse stack (raw AOD); regridded bicubically in log10 space")->required();
    sub->add_option("--elevation", elev_path, "static elevation on the fine grid or a finer grid")->required();
    sub->add_option("--split", split_path, "split.json; train days fit the standardizer and the ridge model")->required();
    sub->add_option("--start", start, "first predicted day (YYYY-MM-DD)")->required();
    sub->add_option("--horizon", horizon, "number of days")->capture_default_str();
    sub->add_option("--mode", mode, "autoregressive | overlap")->check(CLI::IsMember({"autoregressive", "overlap"}))->capture_default_str();
    sub->add_option("--out", out, "predicted stack (raw AOD) .npy")->required();
    sub->callback([&] {
        run = [&] {
            const auto kv = config::parse_file(config_path);
            auto spec = config::spec_from_config(kv);
            const FieldStack truth_log = to_log10(npy::load_stack(truth_path));
            const FieldStack coarse_log = to_log10(npy::load_stack(driver_path));
            const FieldStack driver_log = coarse_log.grid() == truth_log.grid()
                                              ? coarse_log
                                              : regrid::bicubic_regrid(coarse_log, regrid::RegridPlan(coarse_log.grid(), truth_log.grid()));
            const FieldStack elev_stack = npy::load_stack(elev_path);
            detail::require(elev_stack.is_static(), "rollout: elevation must be a 2D static field");
            const Image elevation = elev_stack.grid() == truth_log.grid()
                                        ? elev_stack.image(0)
                                        : regrid::block_average(elev_stack.image(0), elev_stack.grid(), truth_log.grid());
            const json sj = npy::read_json(split_path);
            std::vector<Date> train;
            for (const auto& d : sj.at("train")) train.push_back(Date::parse(d.get<std::string>()));
            const FieldStack* pooled[] = {&truth_log, &driver_log};
            const auto std_params = fit_standardizer(pooled, layers_for(truth_log, train));
            const FieldStack truth = standardize(truth_log, std_params, Direction::forward);
            const FieldStack driver = standardize(driver_log, std_params, Direction::forward);
            const auto statics = predictor::StaticFields::make(truth.grid(), elevation);
            const auto& all = truth.dates();
            const predictor::CalendarFrame cal{all.front(), all.front().year(), all.back().year()};
            Manifest m("rollout");
            if (spec.kind == predictor::Kind::ridge_patch) {
                const auto patches = predictor::training_patches(truth, driver, statics, cal, train, spec);
                spec.ridge = predictor::fit_ridge_patch(patches, spec.lambda);
                if (!spec.clamp) spec.clamp = predictor::clamp_from_patches(patches);
                m.set("ridge", {{"channels", spec.ridge->channels},
                                {"coef", spec.ridge->coef},
                                {"intercept", spec.ridge->intercept},
                                {"training_patches", patches.size()}});
            }
            const Date first = Date::parse(start);
            auto state = predictor::initial_state(truth, first - 1, spec.t_lag);
            const auto cmode = mode == "overlap" ? predictor::ContextMode::overlap : predictor::ContextMode::autoregressive;
            const FieldStack pred = predictor::rollout(state, driver, horizon, statics, cal, spec, cmode, &truth, c.resolved());
            const FieldStack pred_raw = from_log10(standardize(pred, std_params, Direction::inverse));
            const auto dir = out_dir(out);
            npy::save_stack(out, pred_raw);
            add_stack_input(m, truth_path);
            add_stack_input(m, driver_path);
            add_stack_input(m, elev_path);
            m.add_input(config_path);
            m.add_input(split_path);
            json cfg = json::object();
            for (const auto& [k, v] : kv) cfg[k] = v;
            m.set("config", cfg);
            m.set("kind", std::string(predictor::to_string(spec.kind)));
            m.set("t_lag", spec.t_lag);
            m.set("lambda", spec.lambda);
            m.set("halo", spec.halo);
            m.set("stride", spec.stride);
            m.set("eps", spec.eps);
            if (spec.clamp) m.set("clamp", {{"lo", spec.clamp->lo}, {"hi", spec.clamp->hi}, {"knee", spec.clamp->knee}});
            m.set("standardizer", {{"mean", std_params.mean}, {"std", std_params.std}, {"floor_eps", std_params.floor_eps}});
            m.set("start", start);
            m.set("horizon", horizon);
            m.set("mode", mode);
            m.add_output(out);
            finish(m, dir, c);
            return 0;
        };
    });
}

// ---------------------------------------------------------------- demo
void cmd_demo(CLI::App& app, Common& c, std::function<int()>& run) {
    auto* sub = app.add_subcommand("demo", "Synthetic coarse/fine world through the full pipeline");
    static std::string dir = "demo_out";
    static std::uint64_t world_seed = 7, shuffle_seed = 42;
    static int horizon = 10;
    sub->add_option("--out-dir", dir, "directory for reports")->capture_default_str();
    sub->add_option("--seed", world_seed, "synthetic world seed")->capture_default_str();
    sub->add_option("--shuffle-seed", shuffle_seed, "patch stream shuffle seed")->capture_default_str();
    sub->add_option("--horizon", horizon, "autoregressive rollout length")->capture_default_str();
    sub->callback([&] {
        run = [&] {
            demo::DemoConfig cfg;
            cfg.world.seed = world_seed;
            cfg.shuffle_seed = shuffle_seed;
            cfg.horizon = horizon;
            cfg.threads = c.resolved();
            const auto r = demo::run_demo(cfg);
            fs::create_directories(dir);
            json lam = json::array();
            for (const auto& l : r.lambda_scores) lam.push_back({{"lambda", l.lambda}, {"validation_mse", reports::num(l.validation_mse)}});
            json j = {{"split", {{"train", r.split.train.size()}, {"val", r.split.val.size()}, {"test", r.split.test.size()}}},
                      {"standardizer", {{"mean", r.standardizer.mean}, {"std", r.standardizer.std}}},
                      {"lambda_selection", lam},
                      {"model", {{"channels", r.model.channels}, {"coef", r.model.coef}, {"intercept", r.model.intercept}, {"lambda", r.model.lambda}}},
                      {"clamp", {{"lo", r.clamp.lo}, {"hi", r.clamp.hi}, {"knee", r.clamp.knee}}},
                      {"patches", {{"train", r.train_patches}, {"validation", r.validation_patches}}},
                      {"test", {{"ridge_patch", reports::to_json(r.ridge)},
                                {"persistence", reports::to_json(r.persistence)},
                                {"coarse_driver", reports::to_json(r.coarse_driver)}}},
                      {"wd", {{"driver_vs_truth", reports::to_json(r.driver_vs_truth)}, {"ridge_vs_truth", reports::to_json(r.ridge_vs_truth)}}},
                      {"rollout", {{"days", reports::dates_json(r.rollout_days)},
                                   {"prediction", reports::to_json(r.rollout_prediction)},
                                   {"driver", reports::to_json(r.rollout_driver)},
                                   {"truth", reports::to_json(r.rollout_truth)}}}};
            const fs::path d(dir);
            std::ofstream(d / "demo_report.json") << j.dump(2) << "\n";
            std::ofstream(d / "test_metrics_ridge.csv") << reports::to_csv(r.ridge);
            std::ofstream(d / "rollout_lag_prediction.csv") << reports::to_csv(r.rollout_prediction);
            std::ofstream(d / "rollout_lag_driver.csv") << reports::to_csv(r.rollout_driver);
            std::ofstream(d / "rollout_lag_truth.csv") << reports::to_csv(r.rollout_truth);

            std::printf("split: %zu train / %zu val / %zu test days\n", r.split.train.size(), r.split.val.size(), r.split.test.size());
            std::printf("ridge lambda %.0e (validation MSE %.5f)\n", r.model.lambda,
                        std::min_element(r.lambda_scores.begin(), r.lambda_scores.end(),
                                         [](auto& a, auto& b) { return a.validation_mse < b.validation_mse; })->validation_mse);
            std::printf("test R2 / RMSE (log10 AOD): ridge %.4f / %.4f, persistence %.4f / %.4f, coarse driver %.4f / %.4f\n",
                        r.ridge.mean.r2, r.ridge.mean.rmse, r.persistence.mean.r2, r.persistence.mean.rmse,
                        r.coarse_driver.mean.r2, r.coarse_driver.mean.rmse);
            std::printf("test KGE: ridge %.4f, persistence %.4f, coarse driver %.4f\n", r.ridge.mean.kge,
                        r.persistence.mean.kge, r.coarse_driver.mean.kge);
            std::printf("mean WD to truth: driver %.4f, ridge %.4f\n", r.driver_vs_truth.mean, r.ridge_vs_truth.mean);
            if (!r.rollout_prediction.lags.empty())
                std::printf("rollout lag-1 RMSE: prediction %.4f, driver %.4f, truth %.4f; R2: %.4f, %.4f, %.4f\n",
                            r.rollout_prediction.rmse[0], r.rollout_driver.rmse[0], r.rollout_truth.rmse[0],
                            r.rollout_prediction.r2[0], r.rollout_driver.r2[0], r.rollout_truth.r2[0]);
            std::printf("elapsed %.1f s\n", r.seconds);

            Manifest m("demo");
            m.set("world_seed", world_seed);
            m.set("shuffle_seed", shuffle_seed);
            m.set("horizon", horizon);
            m.set("lambdas", cfg.lambdas);
            m.set("t_lag", cfg.t_lag);
            m.set("season", std::string(pipeline::to_string(cfg.season)));
            for (const char* f : {"demo_report.json", "test_metrics_ridge.csv", "rollout_lag_prediction.csv",
                                  "rollout_lag_driver.csv", "rollout_lag_truth.csv"})
                m.add_output(d / f);
            finish(m, d, c);
            return 0;
        };
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Downscaling pipeline: regrid, split, patch, stitch, diagnostics and rollout"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--threads", common.threads, "worker threads (default: DOWNSCALE_THREADS or 1)");
    std::function<int()> run;
    cmd_regrid(app, common, run);
    cmd_split(app, common, run);
    cmd_patch(app, common, run);
    cmd_stitch(app, common, run);
    cmd_wd(app, common, run);
    cmd_variogram(app, common, run);
    cmd_acf(app, common, run);
    cmd_lagmetrics(app, common, run);
    cmd_eval(app, common, run);
    cmd_rollout(app, common, run);
    cmd_demo(app, common, run);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }
    try {
        return run();
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: malformed JSON input: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
