#pragma once

// Halo cropping + separable Hann taper + additive accumulation of predicted
// patches into a full image. Accumulation is additive, so the result does not
// depend on how patches are split into batches.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "array2d.hpp"
#include "error.hpp"
#include "pipeline.hpp"

namespace downscale::stitch {

inline constexpr int kDefaultHalo = 2;
inline constexpr double kDefaultEps = 1e-8;

/// Halo actually dropped on each side of one patch; zero on sides touching the image border.
struct Halos {
    int top = 0, bottom = 0, left = 0, right = 0;
};

/// Retained core: rows [row_begin, row_end), cols [col_begin, col_end) in image coordinates.
struct CoreRegion {
    int row_begin = 0, row_end = 0, col_begin = 0, col_end = 0;
    Halos halos;
    int n_rows() const { return row_end - row_begin; }
    int n_cols() const { return col_end - col_begin; }
};

inline CoreRegion core_region(int y0, int x0, int patch_h, int patch_w, int img_h, int img_w, int h) {
    detail::require(h >= 0, "core_region: negative halo");
    detail::require(y0 >= 0 && x0 >= 0 && y0 + patch_h <= img_h && x0 + patch_w <= img_w,
                    "core_region: patch lies outside the image");
    detail::require(2 * h < patch_h && 2 * h < patch_w, "core_region: halo leaves an empty core");
    CoreRegion c;
    c.halos.top = y0 == 0 ? 0 : h;
    c.halos.bottom = y0 + patch_h == img_h ? 0 : h;
    c.halos.left = x0 == 0 ? 0 : h;
    c.halos.right = x0 + patch_w == img_w ? 0 : h;
    c.row_begin = y0 + c.halos.top;
    c.row_end = y0 + patch_h - c.halos.bottom;
    c.col_begin = x0 + c.halos.left;
    c.col_end = x0 + patch_w - c.halos.right;
    return c;
}

/// w(n; N) = 0.5 (1 - cos(2 pi n / (N - 1))); a length-1 window is {1}.
inline std::vector<double> hann_window(int n) {
    detail::require(n >= 1, "hann_window: length must be positive");
    if (n == 1) return {1.0};
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) w[std::size_t(i)] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / (n - 1)));
    return w;
}

inline Image taper_weights(int n_row, int n_col) {
    const auto wr = hann_window(n_row), wc = hann_window(n_col);
    Image w(static_cast<std::size_t>(n_row), static_cast<std::size_t>(n_col));
    for (int y = 0; y < n_row; ++y)
        for (int x = 0; x < n_col; ++x) w(std::size_t(y), std::size_t(x)) = wr[std::size_t(y)] * wc[std::size_t(x)];
    return w;
}

/// One predicted patch: top-left corner and a height x width block of values.
struct PredictedPatch {
    int y0 = 0;
    int x0 = 0;
    Image values;
};

struct StitchResult {
    Image image;
    Mask covered;  // 1 where Z >= eps
};

class StitchAccumulator {
public:
    StitchAccumulator(std::size_t img_h, std::size_t img_w, int patch_h = pipeline::kPatchSize,
                      int patch_w = pipeline::kPatchSize, int halo = kDefaultHalo, double eps = kDefaultEps)
        : sum_(img_h, img_w), weight_(img_h, img_w), patch_h_(patch_h), patch_w_(patch_w), halo_(halo), eps_(eps) {
        detail::require(eps > 0.0, "StitchAccumulator: eps must be positive");
        detail::require(2 * halo < patch_h && 2 * halo < patch_w, "StitchAccumulator: halo leaves an empty core");
    }

    /// S += 1{Q_i} W_i Y_i and Z += 1{Q_i} W_i for each patch, in the given order.
    void accumulate(std::span<const PredictedPatch> batch) {
        for (const auto& p : batch) add(p);
    }

    void add(const PredictedPatch& p) {
        detail::require(p.values.rows() == std::size_t(patch_h_) && p.values.cols() == std::size_t(patch_w_),
                        "accumulate: patch values do not match the patch shape");
        const auto c = core_region(p.y0, p.x0, patch_h_, patch_w_, int(sum_.rows()), int(sum_.cols()), halo_);
        const auto wr = hann_window(c.n_rows()), wc = hann_window(c.n_cols());
        for (int y = c.row_begin; y < c.row_end; ++y) {
            const double w_row = wr[std::size_t(y - c.row_begin)];
            for (int x = c.col_begin; x < c.col_end; ++x) {
                const double w = w_row * wc[std::size_t(x - c.col_begin)];
                sum_(std::size_t(y), std::size_t(x)) += w * p.values(std::size_t(y - p.y0), std::size_t(x - p.x0));
                weight_(std::size_t(y), std::size_t(x)) += w;
            }
        }
    }

    /// Y = S / max(Z, eps); pixels with Z < eps are flagged uncovered.
    StitchResult finalize() const {
        StitchResult r{Image(sum_.rows(), sum_.cols()), Mask(sum_.rows(), sum_.cols())};
        for (std::size_t i = 0; i < sum_.size(); ++i) {
            const double z = weight_.flat()[i];
            r.image.flat()[i] = sum_.flat()[i] / std::max(z, eps_);
            r.covered.flat()[i] = z >= eps_ ? 1 : 0;
        }
        return r;
    }

    const Image& weighted_sum() const { return sum_; }
    const Image& weights() const { return weight_; }
    double eps() const { return eps_; }
    int halo() const { return halo_; }

private:
    Image sum_;
    Image weight_;
    int patch_h_;
    int patch_w_;
    int halo_;
    double eps_;
};

}  // namespace downscale::stitch
