#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "array2d.hpp"
#include "date.hpp"
#include "error.hpp"

namespace downscale::pipeline {

enum class Season { DJF, MAM, JJA, SON };

inline std::string_view to_string(Season s) {
    switch (s) {
        case Season::DJF: return "DJF";
        case Season::MAM: return "MAM";
        case Season::JJA: return "JJA";
        case Season::SON: return "SON";
    }
    return "DJF";
}

inline Season parse_season(std::string_view s) {
    if (s == "DJF") return Season::DJF;
    if (s == "MAM") return Season::MAM;
    if (s == "JJA") return Season::JJA;
    if (s == "SON") return Season::SON;
    throw ValidationError("unknown season '" + std::string(s) + "' (expected DJF, MAM, JJA or SON)");
}

/// Integer season label (0..3), kept unstandardized as a predictor channel.
inline int season_index(Season s) { return static_cast<int>(s); }

inline Season season_of(const Date& d) {
    switch (d.month()) {
        case 12: case 1: case 2: return Season::DJF;
        case 3: case 4: case 5: return Season::MAM;
        case 6: case 7: case 8: return Season::JJA;
        default: return Season::SON;
    }
}

inline constexpr int kBufferDays = 45;

struct SeasonWindow {
    Season season = Season::JJA;
    std::vector<Date> target_days;
    /// Calendar days of lag context preceding each seasonal block. They are
    /// computed by date arithmetic and may fall before the data record.
    std::vector<Date> buffer_days;
};

/// All in-season days of a contiguous daily calendar, plus the 45-day buffer
/// before each contiguous seasonal block.
inline SeasonWindow build_season_windows(std::span<const Date> calendar, Season season,
                                         int buffer_days = kBufferDays) {
    for (std::size_t i = 1; i < calendar.size(); ++i)
        detail::require(calendar[i] - calendar[i - 1] == 1, "build_season_windows: calendar is not contiguous daily");
    SeasonWindow w;
    w.season = season;
    for (std::size_t i = 0; i < calendar.size(); ++i) {
        if (season_of(calendar[i]) != season) continue;
        const bool block_start = w.target_days.empty() || calendar[i] - w.target_days.back() != 1;
        if (block_start)
            for (int b = buffer_days; b >= 1; --b) w.buffer_days.push_back(calendar[i] - b);
        w.target_days.push_back(calendar[i]);
    }
    if (w.target_days.empty())
        throw ValidationError("build_season_windows: season " + std::string(to_string(season)) +
                              " is absent from the calendar");
    return w;
}

struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct SplitAssignment {
    std::vector<Date> train;
    std::vector<Date> val;
    std::vector<Date> test;
    /// Day-level holdout carved from the end of `train` (monitoring stream).
    /// Empty unless requested; its days are also listed in `train`.
    std::vector<Date> train_holdout;
};

inline void check_disjoint(const SplitAssignment& s) {
    std::set<Date> seen;
    for (const auto* role : {&s.train, &s.val, &s.test})
        for (const auto& d : *role)
            if (!seen.insert(d).second)
                throw ValidationError("split: day " + d.iso() + " is assigned to more than one role");
    for (const auto& d : s.train_holdout)
        detail::require(std::binary_search(s.train.begin(), s.train.end(), d),
                        "split: holdout day " + d.iso() + " is not a training day");
}

/// Chronological split: floor(r_train*n) train days, floor(r_val*n) validation
/// days, the remainder to test.
inline SplitAssignment temporal_split(const SeasonWindow& window, SplitRatios r = {},
                                      double train_holdout_fraction = 0.0) {
    const std::size_t n = window.target_days.size();
    detail::require(n >= 10, "temporal_split: need at least 10 target days, got " + std::to_string(n));
    detail::require(r.train > 0 && r.val >= 0 && r.test >= 0 &&
                        std::abs(r.train + r.val + r.test - 1.0) <= 1e-9,
                    "temporal_split: ratios must be non-negative and sum to 1");
    detail::require(train_holdout_fraction >= 0.0 && train_holdout_fraction < 1.0,
                    "temporal_split: holdout fraction must be in [0, 1)");
    for (std::size_t i = 1; i < n; ++i)
        detail::require(window.target_days[i] > window.target_days[i - 1], "temporal_split: days not increasing");
    // the 1e-9 nudge keeps e.g. 0.1*30 = 3.0000000000000004 and 0.7*10 on the intended integer
    const auto n_train = static_cast<std::size_t>(std::floor(r.train * double(n) + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(r.val * double(n) + 1e-9));
    detail::require(n_train + n_val <= n, "temporal_split: ratios exceed day count");
    SplitAssignment s;
    const auto& d = window.target_days;
    s.train.assign(d.begin(), d.begin() + std::ptrdiff_t(n_train));
    s.val.assign(d.begin() + std::ptrdiff_t(n_train), d.begin() + std::ptrdiff_t(n_train + n_val));
    s.test.assign(d.begin() + std::ptrdiff_t(n_train + n_val), d.end());
    const auto n_hold = static_cast<std::size_t>(std::floor(train_holdout_fraction * double(n_train) + 1e-9));
    s.train_holdout.assign(s.train.end() - std::ptrdiff_t(n_hold), s.train.end());
    check_disjoint(s);
    return s;
}

inline constexpr int kPatchSize = 16;

struct PatchSpec {
    int height = kPatchSize;
    int width = kPatchSize;
    int stride = 8;
    int halo = 0;

    void validate() const {
        detail::require(height >= 1 && width >= 1, "PatchSpec: patch dimensions must be positive");
        detail::require(stride >= 1 && stride <= std::min(height, width), "PatchSpec: stride must be in [1, patch size]");
        detail::require(halo >= 0 && 2 * halo < std::min(height, width), "PatchSpec: halo too large for patch");
    }
};

struct PatchOrigin {
    int y0 = 0;
    int x0 = 0;
    bool operator==(const PatchOrigin&) const = default;
};

/// Row-major top-left corners on the stride lattice that keep the patch inside
/// the image. With `cover_far_edge`, an extra row/column of origins flush with
/// the bottom/right edge is appended when the lattice misses it.
inline std::vector<PatchOrigin> patch_origins(std::size_t img_h, std::size_t img_w, const PatchSpec& spec,
                                              bool cover_far_edge = false) {
    spec.validate();
    if (img_h < std::size_t(spec.height) || img_w < std::size_t(spec.width))
        throw ValidationError("extract_patches: image " + std::to_string(img_h) + "x" + std::to_string(img_w) +
                              " is smaller than the patch");
    auto axis = [&](std::size_t n, int size) {
        std::vector<int> v;
        const int last = int(n) - size;
        for (int p = 0; p <= last; p += spec.stride) v.push_back(p);
        if (cover_far_edge && v.back() != last) v.push_back(last);
        return v;
    };
    const auto ys = axis(img_h, spec.height), xs = axis(img_w, spec.width);
    std::vector<PatchOrigin> out;
    out.reserve(ys.size() * xs.size());
    for (int y : ys)
        for (int x : xs) out.push_back({y, x});
    return out;
}

/// A window cut from one day's image(s). `values` is channels x height x width.
struct Patch {
    int y0 = 0;
    int x0 = 0;
    Date day;
    int height = kPatchSize;
    int width = kPatchSize;
    std::vector<std::string> channels;
    std::vector<double> values;

    double at(std::size_t c, int y, int x) const {
        return values[(c * std::size_t(height) + std::size_t(y)) * std::size_t(width) + std::size_t(x)];
    }
};

/// Cuts every lattice patch from a multi-channel image (all channels share a shape).
inline std::vector<Patch> extract_patches(std::span<const Image> channels, std::span<const std::string> names,
                                          const PatchSpec& spec, Date day = {}, bool cover_far_edge = false) {
    detail::require(!channels.empty(), "extract_patches: no channels");
    detail::require(names.empty() || names.size() == channels.size(), "extract_patches: channel name count mismatch");
    const std::size_t H = channels[0].rows(), W = channels[0].cols();
    for (const auto& c : channels)
        detail::require(c.rows() == H && c.cols() == W, "extract_patches: channel shapes differ");
    std::vector<Patch> out;
    for (const auto& o : patch_origins(H, W, spec, cover_far_edge)) {
        Patch p;
        p.y0 = o.y0;
        p.x0 = o.x0;
        p.day = day;
        p.height = spec.height;
        p.width = spec.width;
        p.channels.assign(names.begin(), names.end());
        p.values.reserve(channels.size() * std::size_t(spec.height * spec.width));
        for (const auto& c : channels)
            for (int y = 0; y < spec.height; ++y)
                for (int x = 0; x < spec.width; ++x)
                    p.values.push_back(c(std::size_t(o.y0 + y), std::size_t(o.x0 + x)));
        out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<Patch> extract_patches(const Image& field, const PatchSpec& spec, Date day = {}) {
    const std::string name = "field";
    return extract_patches(std::span<const Image>(&field, 1), std::span<const std::string>(&name, 1), spec, day);
}

/// Per-epoch patch streams. Every patch of a given day lands in exactly one stream.
struct DayStreams {
    std::vector<std::size_t> train;  // indices into the patch list
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
    std::vector<std::size_t> holdout;  // train_holdout days, excluded from `train`
};

namespace detail {

// Unbiased draw in [0, n) from the raw 64-bit engine output so shuffles are
// identical across standard library implementations.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do r = rng(); while (r >= limit);
    return r % n;
}

template <class T>
void fisher_yates(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[bounded(rng, i)]);
}

}  // namespace detail

/// Groups patches by day and shuffles day groups, then patches inside each
/// group, with a seeded generator.
inline DayStreams group_by_day(std::span<const Patch> patches, const SplitAssignment& split, std::uint64_t seed) {
    check_disjoint(split);
    enum class Role { train, validation, test, holdout };
    auto role_of = [&](const Date& d) {
        auto in = [&](const std::vector<Date>& v) { return std::binary_search(v.begin(), v.end(), d); };
        if (in(split.train)) return in(split.train_holdout) ? Role::holdout : Role::train;
        if (in(split.val)) return Role::validation;
        if (in(split.test)) return Role::test;
        throw ValidationError("group_by_day: patch day " + d.iso() + " belongs to no split");
    };
    std::map<Date, std::vector<std::size_t>> by_day;
    for (std::size_t i = 0; i < patches.size(); ++i) by_day[patches[i].day].push_back(i);

    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::size_t>> groups[4];
    for (auto& [day, idx] : by_day) groups[static_cast<int>(role_of(day))].push_back(idx);
    DayStreams out;
    std::vector<std::size_t>* dst[4] = {&out.train, &out.validation, &out.test, &out.holdout};
    for (int r = 0; r < 4; ++r) {
        detail::fisher_yates(groups[r], rng);
        for (auto& g : groups[r]) {
            detail::fisher_yates(g, rng);
            dst[r]->insert(dst[r]->end(), g.begin(), g.end());
        }
    }
    return out;
}

}  // namespace downscale::pipeline
