#pragma once

// Flat key = value run configuration. '#' starts a comment; string values may
// be double-quoted. Unknown keys and repeated keys are errors.

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "error.hpp"
#include "predictor.hpp"

namespace downscale::config {

using KeyValues = std::map<std::string, std::string>;

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {"kind",      "t_lag",     "lambda",     "halo",    "stride",
                                               "train_stride", "eps",    "clamp_lo",   "clamp_hi", "clamp_knee",
                                               "command",   "exchange_dir", "seed"};
    return keys;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

template <class T>
T number(const KeyValues& kv, const std::string& key, T fallback) {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    std::istringstream in(it->second);
    T v{};
    in >> v;
    if (!in || !(in >> std::ws).eof())
        throw ValidationError("config: value of '" + key + "' is not a number: " + it->second);
    return v;
}

}  // namespace detail

inline KeyValues parse(std::istream& in) {
    KeyValues kv;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        line = detail::trim(detail::strip_comment(line));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (!known_keys().contains(key))
            throw ValidationError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (!kv.emplace(key, value).second)
            throw ValidationError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return kv;
}

inline KeyValues parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open " + path);
    return parse(in);
}

/// Predictor settings from a config. t_lag is required; the clamp is set only
/// when both bounds are given.
inline predictor::PredictorSpec spec_from_config(const KeyValues& kv) {
    predictor::PredictorSpec s;
    if (const auto it = kv.find("kind"); it != kv.end()) s.kind = predictor::parse_kind(it->second);
    downscale::detail::require(kv.contains("t_lag"), "config: t_lag is required");
    s.t_lag = detail::number<int>(kv, "t_lag", s.t_lag);
    s.lambda = detail::number<double>(kv, "lambda", s.lambda);
    s.halo = detail::number<int>(kv, "halo", s.halo);
    s.stride = detail::number<int>(kv, "stride", s.stride);
    s.train_stride = detail::number<int>(kv, "train_stride", s.train_stride);
    s.eps = detail::number<double>(kv, "eps", s.eps);
    downscale::detail::require(s.t_lag >= 1, "config: t_lag must be >= 1");
    downscale::detail::require(s.lambda >= 0.0, "config: lambda must be >= 0");
    downscale::detail::require(s.eps > 0.0, "config: eps must be > 0");
    s.inference_patches().validate();
    const bool lo = kv.contains("clamp_lo"), hi = kv.contains("clamp_hi");
    downscale::detail::require(lo == hi, "config: clamp_lo and clamp_hi must be given together");
    if (lo) {
        predictor::ClampBounds b;
        b.lo = detail::number<double>(kv, "clamp_lo", b.lo);
        b.hi = detail::number<double>(kv, "clamp_hi", b.hi);
        b.knee = detail::number<double>(kv, "clamp_knee", b.knee);
        downscale::detail::require(b.hi > b.lo, "config: clamp_hi must exceed clamp_lo");
        downscale::detail::require(b.knee > 0.0 && b.knee < 0.5, "config: clamp_knee must be in (0, 0.5)");
        s.clamp = b;
    }
    if (const auto it = kv.find("command"); it != kv.end()) s.command = it->second;
    if (const auto it = kv.find("exchange_dir"); it != kv.end()) s.exchange_dir = it->second;
    if (s.kind == predictor::Kind::external)
        downscale::detail::require(!s.command.empty(), "config: kind = external needs a command");
    return s;
}

inline std::uint64_t seed_from_config(const KeyValues& kv, std::uint64_t fallback = 0) {
    return detail::number<std::uint64_t>(kv, "seed", fallback);
}

}  // namespace downscale::config
