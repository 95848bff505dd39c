#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "array2d.hpp"
#include "date.hpp"
#include "error.hpp"

namespace downscale {

/// Pixel-center coordinates of a lat/lon raster. Each axis is strictly monotone
/// (latitude is often stored north-to-south).
class Grid {
public:
    Grid() = default;
    Grid(std::vector<double> lat, std::vector<double> lon) : lat_(std::move(lat)), lon_(std::move(lon)) {
        check_axis(lat_, "lat");
        check_axis(lon_, "lon");
    }

    /// Regular grid starting at (lat0, lon0) with signed steps.
    static Grid regular(double lat0, double dlat, std::size_t n_lat, double lon0, double dlon,
                        std::size_t n_lon) {
        std::vector<double> lat(n_lat), lon(n_lon);
        for (std::size_t i = 0; i < n_lat; ++i) lat[i] = lat0 + dlat * double(i);
        for (std::size_t j = 0; j < n_lon; ++j) lon[j] = lon0 + dlon * double(j);
        return Grid(std::move(lat), std::move(lon));
    }

    const std::vector<double>& lat() const { return lat_; }
    const std::vector<double>& lon() const { return lon_; }
    std::size_t n_lat() const { return lat_.size(); }
    std::size_t n_lon() const { return lon_.size(); }
    std::size_t n_pixels() const { return lat_.size() * lon_.size(); }

    bool operator==(const Grid&) const = default;

private:
    static void check_axis(const std::vector<double>& a, const char* name) {
        detail::require(!a.empty(), std::string("grid axis '") + name + "' is empty");
        for (double v : a)
            detail::require(std::isfinite(v), std::string("grid axis '") + name + "' has non-finite value");
        if (a.size() < 2) return;
        const bool up = a[1] > a[0];
        for (std::size_t i = 1; i < a.size(); ++i)
            detail::require(up ? a[i] > a[i - 1] : a[i] < a[i - 1],
                            std::string("grid axis '") + name + "' is not strictly monotone");
    }

    std::vector<double> lat_;
    std::vector<double> lon_;
};

enum class Space { raw, log10, standardized };

inline std::string_view to_string(Space s) {
    switch (s) {
        case Space::raw: return "raw";
        case Space::log10: return "log10";
        case Space::standardized: return "standardized";
    }
    return "raw";
}

inline Space parse_space(std::string_view s) {
    if (s == "raw") return Space::raw;
    if (s == "log10") return Space::log10;
    if (s == "standardized") return Space::standardized;
    throw ValidationError("unknown value space '" + std::string(s) + "'");
}

/// Day x lat x lon stack of one variable. A static field (elevation) is a
/// single layer with no dates.
///
/// The optional validity mask has the same shape as the values; when present,
/// masked-out entries may hold NaN.
class FieldStack {
public:
    FieldStack() = default;
    FieldStack(Grid grid, std::vector<Date> dates, std::vector<double> values, Space space,
               std::string var_name = "dust_ext_aod", std::vector<std::uint8_t> mask = {})
        : grid_(std::move(grid)),
          dates_(std::move(dates)),
          values_(std::move(values)),
          mask_(std::move(mask)),
          space_(space),
          var_name_(std::move(var_name)) {
        const std::size_t npx = grid_.n_pixels();
        detail::require(npx > 0, "FieldStack: empty grid");
        detail::require(values_.size() % npx == 0, "FieldStack: values do not tile the grid");
        const std::size_t layers = values_.size() / npx;
        if (dates_.empty())
            detail::require(layers == 1, "FieldStack: a stack without dates must have exactly one layer");
        else
            detail::require(layers == dates_.size(), "FieldStack: layer count does not match date count");
        for (std::size_t i = 1; i < dates_.size(); ++i)
            detail::require(dates_[i] > dates_[i - 1], "FieldStack: dates must be strictly increasing");
        detail::require(mask_.empty() || mask_.size() == values_.size(),
                        "FieldStack: mask shape does not match values");
        for (std::size_t i = 0; i < values_.size(); ++i)
            if (!std::isfinite(values_[i]) && valid(i))
                throw ValidationError("FieldStack: non-finite value at a valid pixel");
    }

    /// Static (time-invariant) single-layer field.
    static FieldStack static_field(Grid grid, const Image& img, Space space, std::string var_name) {
        detail::require(img.rows() == grid.n_lat() && img.cols() == grid.n_lon(),
                        "static field shape does not match grid");
        return FieldStack(std::move(grid), {}, img.vec(), space, std::move(var_name));
    }

    const Grid& grid() const { return grid_; }
    const std::vector<Date>& dates() const { return dates_; }
    const std::vector<double>& values() const { return values_; }
    const std::vector<std::uint8_t>& mask() const { return mask_; }
    bool has_mask() const { return !mask_.empty(); }
    Space space() const { return space_; }
    const std::string& var_name() const { return var_name_; }
    bool is_static() const { return dates_.empty(); }

    std::size_t n_layers() const { return values_.size() / grid_.n_pixels(); }
    std::size_t rows() const { return grid_.n_lat(); }
    std::size_t cols() const { return grid_.n_lon(); }

    bool valid(std::size_t flat_index) const { return mask_.empty() || mask_[flat_index] != 0; }

    std::span<const double> layer(std::size_t k) const {
        const std::size_t npx = grid_.n_pixels();
        return std::span<const double>(values_).subspan(k * npx, npx);
    }
    Image image(std::size_t k) const {
        auto l = layer(k);
        return Image(rows(), cols(), std::vector<double>(l.begin(), l.end()));
    }
    /// Validity of layer k (all ones when no mask is attached).
    Mask layer_mask(std::size_t k) const {
        const std::size_t npx = grid_.n_pixels();
        if (mask_.empty()) return Mask(rows(), cols(), 1);
        return Mask(rows(), cols(),
                    std::vector<std::uint8_t>(mask_.begin() + std::ptrdiff_t(k * npx),
                                              mask_.begin() + std::ptrdiff_t((k + 1) * npx)));
    }

    std::optional<std::size_t> index_of(const Date& d) const {
        auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
        if (it == dates_.end() || *it != d) return std::nullopt;
        return std::size_t(it - dates_.begin());
    }

    /// New stack with the same metadata and different values/space.
    FieldStack with_values(std::vector<double> values, Space space) const {
        return FieldStack(grid_, dates_, std::move(values), space, var_name_, mask_);
    }

    /// Subset of layers, in the given order (which must keep dates increasing).
    FieldStack select(std::span<const std::size_t> idx) const {
        const std::size_t npx = grid_.n_pixels();
        std::vector<Date> d;
        std::vector<double> v;
        std::vector<std::uint8_t> m;
        v.reserve(idx.size() * npx);
        for (std::size_t k : idx) {
            detail::require(k < n_layers(), "FieldStack::select: layer index out of range");
            if (!dates_.empty()) d.push_back(dates_[k]);
            auto l = layer(k);
            v.insert(v.end(), l.begin(), l.end());
            if (!mask_.empty())
                m.insert(m.end(), mask_.begin() + std::ptrdiff_t(k * npx),
                         mask_.begin() + std::ptrdiff_t((k + 1) * npx));
        }
        return FieldStack(grid_, std::move(d), std::move(v), space_, var_name_, std::move(m));
    }

    /// Builds a dated stack from per-day images.
    static FieldStack from_images(Grid grid, std::vector<Date> dates, std::span<const Image> images,
                                  Space space, std::string var_name = "dust_ext_aod") {
        detail::require(dates.size() == images.size(), "from_images: dates/images length mismatch");
        std::vector<double> v;
        v.reserve(images.size() * grid.n_pixels());
        for (const auto& img : images) {
            detail::require(img.rows() == grid.n_lat() && img.cols() == grid.n_lon(),
                            "from_images: image shape does not match grid");
            v.insert(v.end(), img.vec().begin(), img.vec().end());
        }
        return FieldStack(std::move(grid), std::move(dates), std::move(v), space, std::move(var_name));
    }

private:
    Grid grid_;
    std::vector<Date> dates_;
    std::vector<double> values_;
    std::vector<std::uint8_t> mask_;
    Space space_ = Space::raw;
    std::string var_name_;
};

inline constexpr double kDefaultFloorEps = 1e-6;

/// Mean/std of log10 values pooled over training pixels. Population convention.
struct StandardizationParams {
    double mean = 0.0;
    double std = 1.0;
    double floor_eps = kDefaultFloorEps;
};

/// v -> log10(max(v, floor_eps)). Masked entries pass through untouched.
inline FieldStack to_log10(const FieldStack& stack, double floor_eps = kDefaultFloorEps) {
    detail::require(stack.space() == Space::raw, "to_log10: stack is not in raw space");
    detail::require(floor_eps > 0.0, "to_log10: floor_eps must be positive");
    std::vector<double> out(stack.values());
    for (std::size_t i = 0; i < out.size(); ++i)
        if (stack.valid(i)) out[i] = std::log10(std::max(out[i], floor_eps));
    return stack.with_values(std::move(out), Space::log10);
}

/// Inverse of to_log10 (values that were floored come back as floor_eps).
inline FieldStack from_log10(const FieldStack& stack) {
    detail::require(stack.space() == Space::log10, "from_log10: stack is not in log10 space");
    std::vector<double> out(stack.values());
    for (std::size_t i = 0; i < out.size(); ++i)
        if (stack.valid(i)) out[i] = std::pow(10.0, out[i]);
    return stack.with_values(std::move(out), Space::raw);
}

/// Pools valid pixels of the listed layers across all given stacks.
inline StandardizationParams fit_standardizer(std::span<const FieldStack* const> stacks,
                                              std::span<const std::size_t> train_layers,
                                              double floor_eps = kDefaultFloorEps) {
    detail::require(!train_layers.empty(), "fit_standardizer: empty training set");
    long double sum = 0.0L;
    std::size_t n = 0;
    for (const FieldStack* s : stacks) {
        detail::require(s->space() == Space::log10, "fit_standardizer: stack is not in log10 space");
        const std::size_t npx = s->grid().n_pixels();
        for (std::size_t k : train_layers) {
            detail::require(k < s->n_layers(), "fit_standardizer: train day out of range");
            for (std::size_t p = 0; p < npx; ++p)
                if (s->valid(k * npx + p)) {
                    sum += s->values()[k * npx + p];
                    ++n;
                }
        }
    }
    detail::require(n > 0, "fit_standardizer: no valid training pixels");
    const double mean = double(sum / (long double)n);
    long double ss = 0.0L;
    for (const FieldStack* s : stacks) {
        const std::size_t npx = s->grid().n_pixels();
        for (std::size_t k : train_layers)
            for (std::size_t p = 0; p < npx; ++p)
                if (s->valid(k * npx + p)) {
                    const long double d = (long double)s->values()[k * npx + p] - mean;
                    ss += d * d;
                }
    }
    const double sd = double(std::sqrt(ss / (long double)n));
    if (!(sd > 0.0)) throw ValidationError("fit_standardizer: zero variance over training pixels");
    return {mean, sd, floor_eps};
}

inline StandardizationParams fit_standardizer(const FieldStack& stack,
                                              std::span<const std::size_t> train_layers,
                                              double floor_eps = kDefaultFloorEps) {
    const FieldStack* p = &stack;
    return fit_standardizer(std::span<const FieldStack* const>(&p, 1), train_layers, floor_eps);
}

/// Maps training dates to layer indices of `stack`; every date must be present.
inline std::vector<std::size_t> layers_for(const FieldStack& stack, std::span<const Date> days) {
    std::vector<std::size_t> idx;
    idx.reserve(days.size());
    for (const auto& d : days) {
        auto k = stack.index_of(d);
        if (!k) throw ValidationError("date " + d.iso() + " not present in stack");
        idx.push_back(*k);
    }
    return idx;
}

enum class Direction { forward, inverse };

inline double standardize_value(double v, const StandardizationParams& p, Direction dir) {
    return dir == Direction::forward ? (v - p.mean) / p.std : v * p.std + p.mean;
}

/// forward: log10 -> standardized; inverse: standardized -> log10.
inline FieldStack standardize(const FieldStack& stack, const StandardizationParams& p, Direction dir) {
    detail::require(p.std > 0.0, "standardize: std must be positive");
    const Space want = dir == Direction::forward ? Space::log10 : Space::standardized;
    detail::require(stack.space() == want,
                    std::string("standardize: expected a stack in ") + std::string(to_string(want)) + " space");
    std::vector<double> out(stack.values());
    for (std::size_t i = 0; i < out.size(); ++i)
        if (stack.valid(i)) out[i] = standardize_value(out[i], p, dir);
    return stack.with_values(std::move(out), dir == Direction::forward ? Space::standardized : Space::log10);
}

}  // namespace downscale
