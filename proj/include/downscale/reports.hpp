#pragma once

// JSON and CSV renderings of the diagnostic reports. Non-finite numbers are
// JSON null and CSV "nan". CSV columns:
//   wd         date,wd,wd_exact,n_pixels
//   variogram  bin,lo_km,hi_km,center_km,gamma,pairs,model
//   acf        lag,acf,pacf
//   lagmetrics lag,rmse,r2,n_pairs
//   eval       date,mae,rmse,r2,nse,kge,r,beta,gamma

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "geostat.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "similarity.hpp"
#include "temporal.hpp"

namespace downscale::reports {

using nlohmann::json;

inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline std::string csv_num(double v) {
    if (!std::isfinite(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline json dates_json(const std::vector<Date>& days) {
    json a = json::array();
    for (const auto& d : days) a.push_back(d.iso());
    return a;
}

inline json to_json(const pipeline::SplitAssignment& s) {
    return {{"train", dates_json(s.train)},
            {"val", dates_json(s.val)},
            {"test", dates_json(s.test)},
            {"train_holdout", dates_json(s.train_holdout)}};
}

inline json to_json(const similarity::WdReport& r) {
    json days = json::array();
    for (const auto& d : r.per_day)
        days.push_back({{"date", d.date.iso()}, {"wd", num(d.wd)}, {"wd_exact", num(d.wd_exact)}, {"n_pixels", d.n_pixels}});
    return {{"bins", r.bins}, {"mean", num(r.mean)}, {"p10", num(r.p10)}, {"p90", num(r.p90)},
            {"pooled", num(r.pooled)}, {"per_day", days}};
}

inline std::string to_csv(const similarity::WdReport& r) {
    std::ostringstream o;
    o << "date,wd,wd_exact,n_pixels\n";
    for (const auto& d : r.per_day)
        o << d.date.iso() << ',' << csv_num(d.wd) << ',' << csv_num(d.wd_exact) << ',' << d.n_pixels << '\n';
    return o.str();
}

inline json to_json(const geostat::VariogramEstimate& v, const geostat::SphericalFit& f) {
    json bins = json::array();
    for (std::size_t k = 0; k < v.n_bins(); ++k)
        bins.push_back({{"lo_km", v.bin_edges[k]},
                        {"hi_km", v.bin_edges[k + 1]},
                        {"center_km", v.bin_centers[k]},
                        {"gamma", v.empty(k) ? json(nullptr) : num(v.gamma[k])},
                        {"pairs", v.pair_counts[k]}});
    return {{"bins", bins},
            {"fit",
             {{"model", "spherical"},
              {"nugget", num(f.nugget)},
              {"partial_sill", num(f.partial_sill)},
              {"sill", num(f.sill())},
              {"range_km", f.pure_nugget ? json(nullptr) : num(f.range)},
              {"rmse", num(f.rmse)},
              {"pure_nugget", f.pure_nugget}}}};
}

inline std::string to_csv(const geostat::VariogramEstimate& v, const geostat::SphericalFit& f) {
    std::ostringstream o;
    o << "bin,lo_km,hi_km,center_km,gamma,pairs,model\n";
    for (std::size_t k = 0; k < v.n_bins(); ++k)
        o << k << ',' << csv_num(v.bin_edges[k]) << ',' << csv_num(v.bin_edges[k + 1]) << ','
          << csv_num(v.bin_centers[k]) << ',' << (v.empty(k) ? std::string("nan") : csv_num(v.gamma[k])) << ','
          << v.pair_counts[k] << ',' << csv_num(geostat::spherical_model(v.bin_centers[k], f)) << '\n';
    return o.str();
}

inline json to_json(const temporal::AcfPacf& a) {
    json rows = json::array();
    for (std::size_t k = 0; k < a.lags.size(); ++k)
        rows.push_back({{"lag", a.lags[k]}, {"acf", num(a.acf[k])}, {"pacf", num(a.pacf[k])}});
    return {{"n", a.n}, {"lags", rows}};
}

inline std::string to_csv(const temporal::AcfPacf& a) {
    std::ostringstream o;
    o << "lag,acf,pacf\n";
    for (std::size_t k = 0; k < a.lags.size(); ++k) o << a.lags[k] << ',' << csv_num(a.acf[k]) << ',' << csv_num(a.pacf[k]) << '\n';
    return o.str();
}

inline json to_json(const temporal::LagCurve& c) {
    json rows = json::array();
    for (std::size_t k = 0; k < c.lags.size(); ++k)
        rows.push_back({{"lag", c.lags[k]}, {"rmse", num(c.rmse[k])}, {"r2", num(c.r2[k])}, {"n_pairs", c.n_pairs[k]}});
    return {{"lags", rows}};
}

inline std::string to_csv(const temporal::LagCurve& c) {
    std::ostringstream o;
    o << "lag,rmse,r2,n_pairs\n";
    for (std::size_t k = 0; k < c.lags.size(); ++k)
        o << c.lags[k] << ',' << csv_num(c.rmse[k]) << ',' << csv_num(c.r2[k]) << ',' << c.n_pairs[k] << '\n';
    return o.str();
}

inline json to_json(const metrics::MetricsReport& m) {
    return {{"mae", num(m.mae)}, {"rmse", num(m.rmse)}, {"r2", num(m.r2)}, {"nse", num(m.nse)},
            {"kge", num(m.kge)}, {"r", num(m.r)},       {"beta", num(m.beta)}, {"gamma", num(m.gamma_ratio)}};
}

inline json to_json(const metrics::EvalReport& e) {
    json days = json::array();
    for (const auto& d : e.per_day) {
        json row = to_json(d.scores);
        row["date"] = d.date.iso();
        days.push_back(row);
    }
    return {{"mean", to_json(e.mean)},
            {"undefined_r2", e.undefined_r2},
            {"undefined_kge", e.undefined_kge},
            {"per_day", days}};
}

inline std::string to_csv(const metrics::EvalReport& e) {
    std::ostringstream o;
    o << "date,mae,rmse,r2,nse,kge,r,beta,gamma\n";
    for (const auto& d : e.per_day) {
        const auto& m = d.scores;
        o << d.date.iso() << ',' << csv_num(m.mae) << ',' << csv_num(m.rmse) << ',' << csv_num(m.r2) << ','
          << csv_num(m.nse) << ',' << csv_num(m.kge) << ',' << csv_num(m.r) << ',' << csv_num(m.beta) << ','
          << csv_num(m.gamma_ratio) << '\n';
    }
    return o.str();
}

/// Writes `j` (".json") or `csv` (".csv") depending on the extension of `path`.
inline void write_report(const std::filesystem::path& path, const json& j, const std::string& csv) {
    const auto ext = path.extension().string();
    if (ext != ".json" && ext != ".csv") throw ValidationError("report path must end in .json or .csv: " + path.string());
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    if (ext == ".json") out << j.dump(2) << "\n";
    else out << csv;
}

}  // namespace downscale::reports
