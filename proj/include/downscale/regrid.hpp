#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "array2d.hpp"
#include "error.hpp"
#include "raster.hpp"

namespace downscale::regrid {

/// Keys cubic-convolution kernel.
inline double keys_kernel(double x, double a = -0.5) {
    x = std::abs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

/// Four distinct source indices (fewer real ones on axes shorter than 4,
/// padded with zero weight) and their weights.
struct AxisStencil {
    std::array<std::size_t, 4> index{};
    std::array<double, 4> weight{};
};

/// One output pixel's 4x4 neighbourhood, expanded from the two axis stencils.
struct PixelStencil {
    std::array<std::size_t, 4> rows{};
    std::array<std::size_t, 4> cols{};
    std::array<std::array<double, 4>, 4> weight{};
};

namespace detail {

// Source axes must be regularly spaced so index space is an affine image of
// coordinate space (that is what makes the kernel reproduce linear ramps).
inline void require_regular(const std::vector<double>& a, const char* name) {
    if (a.size() < 3) return;
    const double step = (a.back() - a.front()) / double(a.size() - 1);
    for (std::size_t i = 0; i < a.size(); ++i)
        downscale::detail::require(std::abs(a[i] - (a.front() + step * double(i))) <= 1e-6 * std::abs(step),
                                   std::string("bicubic_regrid: source axis '") + name +
                                       "' is not regularly spaced");
}

// Ghost samples beyond either end are linear extrapolations of the two
// outermost samples, f(-k) = (1 + k) f(0) - k f(1), folded into the real
// indices. Unlike edge replication this keeps linear ramps exact up to and
// slightly beyond the outermost centres.
inline std::vector<AxisStencil> axis_stencils(const std::vector<double>& src, const std::vector<double>& dst,
                                              const char* name, double a) {
    require_regular(src, name);
    const std::size_t n = src.size();
    std::vector<AxisStencil> out(dst.size());
    if (n == 1) {
        for (auto& s : out) s.weight = {1.0, 0.0, 0.0, 0.0};
        return out;
    }
    const double step = (src.back() - src.front()) / double(n - 1);
    const long last = long(n) - 1;
    // targets may sit up to half a source cell beyond the outermost centres
    constexpr double kHullTol = 0.5 + 1e-9;
    for (std::size_t k = 0; k < dst.size(); ++k) {
        const double u = (dst[k] - src.front()) / step;
        if (u < -kHullTol || u > double(last) + kHullTol)
            throw ValidationError(std::string("bicubic_regrid: target ") + name + " " + std::to_string(dst[k]) +
                                  " lies outside the source grid");
        const double base = std::floor(u);
        const double t = u - base;
        const auto i0 = static_cast<long>(base);
        // window of real indices that holds every folded contribution
        const long lo = std::clamp(i0 - 1, 0L, std::max(0L, last - 3));
        std::array<double, 4> w{};
        auto put = [&](long idx, double v) { w[std::size_t(idx - lo)] += v; };
        for (int m = 0; m < 4; ++m) {
            const long idx = i0 - 1 + m;
            const double kw = keys_kernel(t - double(m - 1), a);
            if (idx < 0) {
                put(0, kw * double(1 - idx));
                put(1, kw * double(idx));
            } else if (idx > last) {
                const long e = idx - last;
                put(last, kw * double(1 + e));
                put(last - 1, -kw * double(e));
            } else {
                put(idx, kw);
            }
        }
        for (int m = 0; m < 4; ++m) {
            out[k].index[std::size_t(m)] = std::size_t(std::min(lo + m, last));
            out[k].weight[std::size_t(m)] = lo + m <= last ? w[std::size_t(m)] : 0.0;
        }
    }
    return out;
}

}  // namespace detail

/// Precomputed separable bicubic stencils from a source grid to a target grid.
class RegridPlan {
public:
    RegridPlan(Grid source, Grid target, double kernel_a = -0.5)
        : source_(std::move(source)), target_(std::move(target)) {
        rows_ = detail::axis_stencils(source_.lat(), target_.lat(), "lat", kernel_a);
        cols_ = detail::axis_stencils(source_.lon(), target_.lon(), "lon", kernel_a);
    }

    const Grid& source() const { return source_; }
    const Grid& target() const { return target_; }
    const AxisStencil& row_stencil(std::size_t i) const { return rows_[i]; }
    const AxisStencil& col_stencil(std::size_t j) const { return cols_[j]; }

    PixelStencil stencil(std::size_t i, std::size_t j) const {
        PixelStencil p;
        p.rows = rows_[i].index;
        p.cols = cols_[j].index;
        for (std::size_t a = 0; a < 4; ++a)
            for (std::size_t b = 0; b < 4; ++b) p.weight[a][b] = rows_[i].weight[a] * cols_[j].weight[b];
        return p;
    }

private:
    Grid source_;
    Grid target_;
    std::vector<AxisStencil> rows_;
    std::vector<AxisStencil> cols_;
};

/// Separable cubic-convolution interpolation at the target pixel centres.
/// Output may overshoot the input range (cubic ringing); it is not clamped.
inline Image bicubic_regrid(const Image& field, const RegridPlan& plan) {
    const Grid& src = plan.source();
    downscale::detail::require(field.rows() == src.n_lat() && field.cols() == src.n_lon(),
                               "bicubic_regrid: field shape does not match source grid");
    const Grid& dst = plan.target();
    Image out(dst.n_lat(), dst.n_lon());
    for (std::size_t i = 0; i < dst.n_lat(); ++i) {
        const auto& rs = plan.row_stencil(i);
        for (std::size_t j = 0; j < dst.n_lon(); ++j) {
            const auto& cs = plan.col_stencil(j);
            double acc = 0.0;
            for (std::size_t a = 0; a < 4; ++a) {
                if (rs.weight[a] == 0.0) continue;
                double row = 0.0;
                for (std::size_t b = 0; b < 4; ++b) row += cs.weight[b] * field(rs.index[a], cs.index[b]);
                acc += rs.weight[a] * row;
            }
            out(i, j) = acc;
        }
    }
    return out;
}

/// Applies the plan to every layer of a stack (which must carry no mask).
inline FieldStack bicubic_regrid(const FieldStack& stack, const RegridPlan& plan) {
    downscale::detail::require(stack.grid() == plan.source(), "bicubic_regrid: stack grid is not the plan source");
    downscale::detail::require(!stack.has_mask(), "bicubic_regrid: masked stacks are not supported");
    std::vector<double> out;
    out.reserve(stack.n_layers() * plan.target().n_pixels());
    for (std::size_t k = 0; k < stack.n_layers(); ++k) {
        const Image r = bicubic_regrid(stack.image(k), plan);
        out.insert(out.end(), r.vec().begin(), r.vec().end());
    }
    return FieldStack(plan.target(), stack.dates(), std::move(out), stack.space(), stack.var_name());
}

namespace detail {

// Target cell index for every fine coordinate (npos when outside all cells).
// Cells are half-open [lo, hi) in ascending coordinate with edges halfway
// between target centres; a single-centre axis owns the whole line.
inline std::vector<std::size_t> assign_cells(const std::vector<double>& fine, const std::vector<double>& target) {
    constexpr auto npos = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> cell(fine.size(), npos);
    const std::size_t n = target.size();
    if (n == 1) {
        std::fill(cell.begin(), cell.end(), 0);
        return cell;
    }
    const double sign = target[1] > target[0] ? 1.0 : -1.0;
    std::vector<double> t(n);
    for (std::size_t k = 0; k < n; ++k) t[k] = sign * target[k];
    std::vector<double> edges(n + 1);
    for (std::size_t k = 1; k < n; ++k) edges[k] = 0.5 * (t[k - 1] + t[k]);
    edges[0] = t[0] - (edges[1] - t[0]);
    edges[n] = t[n - 1] + (t[n - 1] - edges[n - 1]);
    for (std::size_t f = 0; f < fine.size(); ++f) {
        const double x = sign * fine[f];
        if (x < edges[0] || x >= edges[n]) continue;
        const auto it = std::upper_bound(edges.begin(), edges.end(), x);
        cell[f] = std::size_t(it - edges.begin()) - 1;
    }
    return cell;
}

inline double mean_spacing(const std::vector<double>& a) {
    return a.size() < 2 ? std::numeric_limits<double>::infinity()
                        : std::abs(a.back() - a.front()) / double(a.size() - 1);
}

}  // namespace detail

/// Mean of all fine samples whose centres fall inside each target cell.
inline Image block_average(const Image& fine, const Grid& fine_grid, const Grid& target) {
    downscale::detail::require(fine.rows() == fine_grid.n_lat() && fine.cols() == fine_grid.n_lon(),
                               "block_average: field shape does not match fine grid");
    downscale::detail::require(detail::mean_spacing(fine_grid.lat()) < detail::mean_spacing(target.lat()) &&
                                   detail::mean_spacing(fine_grid.lon()) < detail::mean_spacing(target.lon()),
                               "block_average: source grid must be strictly finer than the target");
    constexpr auto npos = std::numeric_limits<std::size_t>::max();
    const auto rcell = detail::assign_cells(fine_grid.lat(), target.lat());
    const auto ccell = detail::assign_cells(fine_grid.lon(), target.lon());
    Image sum(target.n_lat(), target.n_lon());
    Array2D<std::size_t> count(target.n_lat(), target.n_lon());
    for (std::size_t i = 0; i < fine.rows(); ++i) {
        if (rcell[i] == npos) continue;
        for (std::size_t j = 0; j < fine.cols(); ++j) {
            if (ccell[j] == npos) continue;
            sum(rcell[i], ccell[j]) += fine(i, j);
            ++count(rcell[i], ccell[j]);
        }
    }
    for (std::size_t i = 0; i < target.n_lat(); ++i)
        for (std::size_t j = 0; j < target.n_lon(); ++j) {
            if (count(i, j) == 0)
                throw ValidationError("block_average: target cell (" + std::to_string(i) + ", " +
                                      std::to_string(j) + ") contains no fine samples");
            sum(i, j) /= double(count(i, j));
        }
    return sum;
}

inline FieldStack block_average(const FieldStack& stack, const Grid& target) {
    downscale::detail::require(!stack.has_mask(), "block_average: masked stacks are not supported");
    std::vector<double> out;
    out.reserve(stack.n_layers() * target.n_pixels());
    for (std::size_t k = 0; k < stack.n_layers(); ++k) {
        const Image r = block_average(stack.image(k), stack.grid(), target);
        out.insert(out.end(), r.vec().begin(), r.vec().end());
    }
    return FieldStack(target, stack.dates(), std::move(out), stack.space(), stack.var_name());
}

}  // namespace downscale::regrid
