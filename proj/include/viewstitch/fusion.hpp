#pragma once

// Perspective warping into the target frame, the four-factor fusion weights
// (distance transform, gradient damping, match quality, primary bonus), and
// weighted-average compositing with an explicit hole mask.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "viewstitch/common.hpp"
#include "viewstitch/geometry.hpp"
#include "viewstitch/image.hpp"

namespace viewstitch {

struct WarpedView {
    ImageRGB image;        // target frame size; zero outside coverage
    MaskU8 coverage;
    std::string source_id;
    double quality = 1.0;  // w_quality in [0, 1]
    bool is_primary = false;
};

struct WeightMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    WeightMap() = default;
    WeightMap(int w, int h, double v = 0.0)
        : width(w), height(h), values(static_cast<size_t>(w) * h, v) {}

    double& at(int x, int y) { return values[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }
};

struct FusionConfig {
    double gamma = 2.0;         // distance-weight exponent
    double sigma = 50.0;        // gradient scale, luma units
    double primary_bonus = 1.5; // multiplier for the primary camera
};

// ---------------------------------------------------------------------------
// Warping
// ---------------------------------------------------------------------------

// Inverse mapping with bilinear interpolation. A target pixel is covered only
// when its source location lies fully inside the source frame. The identity
// homography reproduces the input bit-exactly.
inline WarpedView warp_perspective(const ImageRGB& image, const Homography& h,
                                   int out_width, int out_height) {
    if (!check_homography(h, image.width, image.height).valid)
        throw Error(errc::domain, "warp_perspective: invalid homography");
    WarpedView out;
    out.image = ImageRGB(out_width, out_height);
    out.coverage = MaskU8(out_width, out_height, 0);

    Mat3 inv = h.m.inverse();
    const double max_x = image.width - 1.0;
    const double max_y = image.height - 1.0;
    for (int y = 0; y < out_height; ++y) {
        for (int x = 0; x < out_width; ++x) {
            double w = inv.m[6] * x + inv.m[7] * y + inv.m[8];
            if (std::abs(w) < 1e-12) continue;
            double sx = (inv.m[0] * x + inv.m[1] * y + inv.m[2]) / w;
            double sy = (inv.m[3] * x + inv.m[4] * y + inv.m[5]) / w;
            if (sx < 0.0 || sy < 0.0 || sx > max_x || sy > max_y) continue;
            int x0 = static_cast<int>(sx);
            int y0 = static_cast<int>(sy);
            int x1 = std::min(x0 + 1, image.width - 1);
            int y1 = std::min(y0 + 1, image.height - 1);
            double fx = sx - x0;
            double fy = sy - y0;
            const uint8_t* p00 = image.px(x0, y0);
            const uint8_t* p10 = image.px(x1, y0);
            const uint8_t* p01 = image.px(x0, y1);
            const uint8_t* p11 = image.px(x1, y1);
            uint8_t* dst = out.image.px(x, y);
            for (int c = 0; c < 3; ++c) {
                double top = p00[c] + (p10[c] - p00[c]) * fx;
                double bot = p01[c] + (p11[c] - p01[c]) * fx;
                dst[c] = clamp_u8(top + (bot - top) * fy);
            }
            out.coverage.at(x, y) = 1;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Distance weight
// ---------------------------------------------------------------------------

namespace detail {

// 1D squared distance transform (lower envelope of parabolas).
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d, int n) {
    static constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        double s = 0.0;
        while (true) {
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

}  // namespace detail

// Exact Euclidean distance to the nearest zero-coverage pixel, with the area
// outside the frame counting as zero coverage (computed on a grid padded by
// one seed ring). Felzenszwalb-Huttenlocher two-pass transform.
inline WeightMap distance_field(const MaskU8& mask) {
    const int w = mask.width, h = mask.height;
    WeightMap out(w, h, 0.0);
    if (w == 0 || h == 0) return out;
    const int pw = w + 2, ph = h + 2;
    // Large finite sentinel: infinities would produce NaN parabola
    // intersections inside the 1D envelope.
    constexpr double kFar = 1e15;

    std::vector<double> grid(static_cast<size_t>(pw) * ph, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            grid[static_cast<size_t>(y + 1) * pw + (x + 1)] = mask.at(x, y) ? kFar : 0.0;

    // Columns, then rows.
    std::vector<double> f(std::max(pw, ph)), d(std::max(pw, ph));
    for (int x = 0; x < pw; ++x) {
        for (int y = 0; y < ph; ++y) f[y] = grid[static_cast<size_t>(y) * pw + x];
        detail::edt_1d(f, d, ph);
        for (int y = 0; y < ph; ++y) grid[static_cast<size_t>(y) * pw + x] = d[y];
    }
    for (int y = 0; y < ph; ++y) {
        for (int x = 0; x < pw; ++x) f[x] = grid[static_cast<size_t>(y) * pw + x];
        detail::edt_1d(f, d, pw);
        for (int x = 0; x < pw; ++x) grid[static_cast<size_t>(y) * pw + x] = d[x];
    }

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(x, y) = std::sqrt(grid[static_cast<size_t>(y + 1) * pw + (x + 1)]);
    return out;
}

// w = (d / d_max)^gamma over the mask; an empty mask gives an all-zero map.
inline WeightMap distance_weight(const MaskU8& mask, double gamma) {
    WeightMap d = distance_field(mask);
    double d_max = 0.0;
    for (double v : d.values) d_max = std::max(d_max, v);
    if (d_max <= 0.0) {
        std::fill(d.values.begin(), d.values.end(), 0.0);
        return d;
    }
    for (double& v : d.values) v = std::pow(v / d_max, gamma);
    return d;
}

// ---------------------------------------------------------------------------
// Gradient weight
// ---------------------------------------------------------------------------

// w = 1 / (1 + |grad I| / sigma) on the luma channel, central differences
// with replicated borders. Flat regions keep weight 1; busy regions shrink.
inline WeightMap gradient_weight(const ImageRGB& image, double sigma) {
    if (sigma <= 0.0) throw Error(errc::config, "gradient_weight: sigma must be > 0");
    ImageF luma = to_luma(image);
    WeightMap out(image.width, image.height, 1.0);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            double gx = 0.5 * (luma.at_clamped(x + 1, y) - luma.at_clamped(x - 1, y));
            double gy = 0.5 * (luma.at_clamped(x, y + 1) - luma.at_clamped(x, y - 1));
            double mag = std::sqrt(gx * gx + gy * gy);
            out.at(x, y) = 1.0 / (1.0 + mag / sigma);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Combined weights and blending
// ---------------------------------------------------------------------------

// Per view: w = w_distance * w_gradient * w_quality * w_primary, zero outside
// coverage by construction of the distance term.
inline std::vector<WeightMap> compute_fusion_weights(const std::vector<WarpedView>& views,
                                                     const FusionConfig& cfg = {}) {
    std::vector<WeightMap> out;
    out.reserve(views.size());
    for (const WarpedView& view : views) {
        if (!out.empty() && (view.image.width != out.front().width ||
                             view.image.height != out.front().height))
            throw Error(errc::domain, "compute_fusion_weights: frame size mismatch");
        WeightMap w = distance_weight(view.coverage, cfg.gamma);
        WeightMap g = gradient_weight(view.image, cfg.sigma);
        double global = view.quality * (view.is_primary ? cfg.primary_bonus : 1.0);
        for (size_t i = 0; i < w.values.size(); ++i) w.values[i] *= g.values[i] * global;
        out.push_back(std::move(w));
    }
    return out;
}

struct SourceDiagnostics {
    std::string name;
    bool used = false;
    std::string provenance;  // branch of the homography actually used
    double alpha = 1.0;      // geometric weight in the base selection
    Vec2 delta_t;            // stage-3 offset, reference-image px
    int match_count = 0;
    int inlier_count = 0;
    double quality = 1.0;
    std::string note;        // fallback or rejection reason
};

struct StitchResult {
    ImageRGB image;
    WeightMap total_weight;
    MaskU8 hole_mask;  // pixels with zero total weight (left black)
    std::vector<SourceDiagnostics> sources;
};

// I(x) = sum_i w_i(x) I_i(x) / sum_i w_i(x) in linear 8-bit space; pixels
// with zero total weight go to the hole mask.
inline StitchResult blend(const std::vector<WarpedView>& views,
                          const std::vector<WeightMap>& weights) {
    if (views.empty()) throw Error(errc::domain, "blend: empty view list");
    if (views.size() != weights.size())
        throw Error(errc::domain, "blend: view/weight count mismatch");
    const int w = views.front().image.width;
    const int h = views.front().image.height;
    for (const WarpedView& v : views)
        if (v.image.width != w || v.image.height != h)
            throw Error(errc::domain, "blend: frame size mismatch");

    StitchResult out;
    out.image = ImageRGB(w, h);
    out.total_weight = WeightMap(w, h, 0.0);
    out.hole_mask = MaskU8(w, h, 0);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double wsum = 0.0;
            double acc[3] = {0, 0, 0};
            for (size_t i = 0; i < views.size(); ++i) {
                double wv = weights[i].at(x, y);
                if (wv <= 0.0) continue;
                const uint8_t* px = views[i].image.px(x, y);
                wsum += wv;
                for (int c = 0; c < 3; ++c) acc[c] += wv * px[c];
            }
            out.total_weight.at(x, y) = wsum;
            if (wsum > 0.0) {
                uint8_t* dst = out.image.px(x, y);
                for (int c = 0; c < 3; ++c) dst[c] = clamp_u8(acc[c] / wsum);
            } else {
                out.hole_mask.at(x, y) = 1;
            }
        }
    }
    return out;
}

}  // namespace viewstitch
