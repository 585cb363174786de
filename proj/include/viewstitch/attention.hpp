#pragma once

// Forward-only numerical kernels for cross-view consistency training: the
// loss terms and their weighted combination, geometry-guided masked
// attention with depth-level hierarchy, target attention maps from
// homography correspondences, and the positional encoding of geometric
// deviation. No autodiff; an external trainer consumes these values.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "viewstitch/common.hpp"
#include "viewstitch/geometry.hpp"
#include "viewstitch/image.hpp"

namespace viewstitch {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

// (height, width, channels) feature tensor, row-major.
struct FeatureGrid {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    FeatureGrid() = default;
    FeatureGrid(int h, int w, int c, double v = 0.0)
        : height(h), width(w), channels(c),
          data(static_cast<size_t>(h) * w * c, v) {}

    size_t locations() const { return static_cast<size_t>(height) * width; }

    double* at(int x, int y) { return data.data() + (static_cast<size_t>(y) * width + x) * channels; }
    const double* at(int x, int y) const {
        return data.data() + (static_cast<size_t>(y) * width + x) * channels;
    }
    double* loc(size_t i) { return data.data() + i * channels; }
    const double* loc(size_t i) const { return data.data() + i * channels; }

    bool same_shape(const FeatureGrid& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

struct AttentionConfig {
    std::vector<double> layer_weights;      // simplex: w_l >= 0, sum = 1
    std::vector<std::vector<uint8_t>> level_masks;  // one per level, sized like k/v
    double kernel_sigma = 2.0;              // target-map kernel width, px

    size_t levels() const { return layer_weights.size(); }
};

struct PEConfig {
    int sin_dims = 32;
    int cos_dims = 32;
    double scale = 1.0;    // frequency scale applied to the Gaussian entries
    uint64_t seed = 17;

    // Fixed frequency matrices (rows x 2), reproducibly seeded.
    std::vector<std::array<double, 2>> w1() const { return make_matrix(sin_dims, 0); }
    std::vector<std::array<double, 2>> w2() const { return make_matrix(cos_dims, 1); }

private:
    std::vector<std::array<double, 2>> make_matrix(int rows, uint64_t salt) const {
        SeededRng rng(mix_seed(seed, salt));
        std::vector<std::array<double, 2>> m(static_cast<size_t>(rows));
        for (auto& row : m) {
            row[0] = scale * rng.gaussian();
            row[1] = scale * rng.gaussian();
        }
        return m;
    }
};

struct LossWeights {
    double alpha = 0.1;    // geometric-consistency weight
    double beta = 0.01;    // perceptual weight
    std::vector<double> lambdas{1.0, 0.5, 0.25};  // per-layer perceptual weights
};

// Cross-view attention insertion dimensions of the backbone these kernels
// feed; recorded as configuration constants for the external trainer.
inline constexpr std::array<int, 4> kEncoderAttentionDims{320, 640, 1280, 1280};
inline constexpr int kMidAttentionDim = 1280;
inline constexpr std::array<int, 4> kDecoderAttentionDims{1280, 1280, 640, 320};

// ---------------------------------------------------------------------------
// Correspondences and positional encoding
// ---------------------------------------------------------------------------

struct CorrespondenceGrid {
    int width = 0;
    int height = 0;
    std::vector<Vec2> coords;      // projected location per source pixel
    std::vector<uint8_t> valid;    // 0 when the projection hits infinity
    std::vector<uint8_t> in_frame; // 1 when the projection lands inside the frame

    size_t index(int x, int y) const { return static_cast<size_t>(y) * width + x; }
};

// p_j = pi(H p_i) per grid location; locations whose denominator vanishes are
// flagged invalid rather than raising.
inline CorrespondenceGrid correspondence_grid(const Homography& h, int width, int height) {
    if (width <= 0 || height <= 0)
        throw Error(errc::config, "correspondence_grid: bad frame size");
    CorrespondenceGrid grid;
    grid.width = width;
    grid.height = height;
    grid.coords.resize(static_cast<size_t>(width) * height);
    grid.valid.assign(grid.coords.size(), 0);
    grid.in_frame.assign(grid.coords.size(), 0);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            size_t i = grid.index(x, y);
            Vec2 out;
            if (!project_point(h.m, {static_cast<double>(x), static_cast<double>(y)}, out))
                continue;
            grid.coords[i] = out;
            grid.valid[i] = 1;
            grid.in_frame[i] = out.x >= -0.5 && out.x <= width - 0.5 && out.y >= -0.5 &&
                               out.y <= height - 0.5;
        }
    return grid;
}

// PE(dp) = concat(sin(W1 dp), cos(W2 dp)); every entry lies in [-1, 1] and is
// 2*pi-periodic in each W*dp coordinate.
inline std::vector<double> positional_encoding(const Vec2& delta_p, const PEConfig& cfg) {
    if (!std::isfinite(delta_p.x) || !std::isfinite(delta_p.y))
        throw Error(errc::domain, "positional_encoding: delta must be finite");
    std::vector<double> out;
    out.reserve(static_cast<size_t>(cfg.sin_dims + cfg.cos_dims));
    for (const auto& row : cfg.w1())
        out.push_back(std::sin(row[0] * delta_p.x + row[1] * delta_p.y));
    for (const auto& row : cfg.w2())
        out.push_back(std::cos(row[0] * delta_p.x + row[1] * delta_p.y));
    return out;
}

// ---------------------------------------------------------------------------
// Masked and hierarchical attention
// ---------------------------------------------------------------------------

struct AttentionOutput {
    FeatureGrid values;              // per query location
    std::vector<uint8_t> empty;      // 1 when no key was admitted for a query
};

// Scaled dot-product attention over the admitted key locations. Masked keys
// are excluded before normalization, so each populated output row is a
// convex combination of admitted values. Queries with no admitted keys get a
// zero vector and a flag.
inline AttentionOutput masked_attention_level(const FeatureGrid& q, const FeatureGrid& k,
                                              const FeatureGrid& v,
                                              const std::vector<uint8_t>& mask) {
    if (q.channels != k.channels)
        throw Error(errc::domain, "masked_attention_level: query/key channel mismatch");
    if (v.height != k.height || v.width != k.width)
        throw Error(errc::domain, "masked_attention_level: key/value grid mismatch");
    if (mask.size() != k.locations())
        throw Error(errc::domain, "masked_attention_level: mask shape mismatch");

    const size_t nq = q.locations();
    const size_t nk = k.locations();
    const int c = q.channels;
    const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(c));

    std::vector<size_t> admitted;
    admitted.reserve(nk);
    for (size_t j = 0; j < nk; ++j)
        if (mask[j]) admitted.push_back(j);

    AttentionOutput out;
    out.values = FeatureGrid(q.height, q.width, v.channels, 0.0);
    out.empty.assign(nq, admitted.empty() ? 1 : 0);
    if (admitted.empty()) return out;

    std::vector<double> logits(admitted.size());
    for (size_t i = 0; i < nq; ++i) {
        const double* qi = q.loc(i);
        double mx = -std::numeric_limits<double>::infinity();
        for (size_t a = 0; a < admitted.size(); ++a) {
            const double* kj = k.loc(admitted[a]);
            double s = 0.0;
            for (int ch = 0; ch < c; ++ch) s += qi[ch] * kj[ch];
            logits[a] = s * inv_sqrt_c;
            mx = std::max(mx, logits[a]);
        }
        double z = 0.0;
        for (double& l : logits) {
            l = std::exp(l - mx);
            z += l;
        }
        double* oi = out.values.loc(i);
        for (size_t a = 0; a < admitted.size(); ++a) {
            double w = logits[a] / z;
            const double* vj = v.loc(admitted[a]);
            for (int ch = 0; ch < v.channels; ++ch) oi[ch] += w * vj[ch];
        }
    }
    return out;
}

// Validates the simplex constraint on the layer weights.
inline void validate_attention_config(const AttentionConfig& cfg) {
    if (cfg.levels() == 0)
        throw Error(errc::config, "attention config: need at least one level");
    if (cfg.level_masks.size() != cfg.levels())
        throw Error(errc::config, "attention config: one mask per level required");
    double sum = 0.0;
    for (double w : cfg.layer_weights) {
        if (w < 0.0) throw Error(errc::config, "attention config: negative layer weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw Error(errc::config, "attention config: layer weights must sum to 1");
}

// Sum_l w_l * Attention(q, k ⊙ M_l, v ⊙ M_l). A query is flagged empty only
// when every level starves it.
inline AttentionOutput hierarchical_attention(const FeatureGrid& q, const FeatureGrid& k,
                                              const FeatureGrid& v,
                                              const AttentionConfig& cfg) {
    validate_attention_config(cfg);
    AttentionOutput out;
    out.values = FeatureGrid(q.height, q.width, v.channels, 0.0);
    out.empty.assign(q.locations(), 1);
    for (size_t l = 0; l < cfg.levels(); ++l) {
        AttentionOutput level = masked_attention_level(q, k, v, cfg.level_masks[l]);
        double w = cfg.layer_weights[l];
        for (size_t i = 0; i < out.values.data.size(); ++i)
            out.values.data[i] += w * level.values.data[i];
        for (size_t i = 0; i < out.empty.size(); ++i)
            if (!level.empty[i]) out.empty[i] = 0;
    }
    return out;
}

// Level masks from preset depth hypotheses: each level admits the key
// locations reachable from some source pixel under the homography induced by
// a fronto-parallel plane at that depth, dilated by `radius`.
inline std::vector<uint8_t> level_mask_from_homography(const Homography& h, int src_w,
                                                       int src_h, int key_w, int key_h,
                                                       double radius) {
    std::vector<uint8_t> mask(static_cast<size_t>(key_w) * key_h, 0);
    CorrespondenceGrid grid = correspondence_grid(h, std::max(src_w, 1), std::max(src_h, 1));
    const double r2 = radius * radius;
    for (size_t i = 0; i < grid.coords.size(); ++i) {
        if (!grid.valid[i]) continue;
        const Vec2& p = grid.coords[i];
        int x0 = std::max(0, static_cast<int>(std::floor(p.x - radius)));
        int x1 = std::min(key_w - 1, static_cast<int>(std::ceil(p.x + radius)));
        int y0 = std::max(0, static_cast<int>(std::floor(p.y - radius)));
        int y1 = std::min(key_h - 1, static_cast<int>(std::ceil(p.y + radius)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                double dx = x - p.x, dy = y - p.y;
                if (dx * dx + dy * dy <= r2) mask[static_cast<size_t>(y) * key_w + x] = 1;
            }
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Target attention map
// ---------------------------------------------------------------------------

struct TargetAttentionMap {
    int size = 0;                 // rows = cols = width * height
    std::vector<double> rows;     // row-major, each row sums to 1
    std::vector<uint8_t> uniform; // 1 when the row fell back to uniform

    double at(size_t r, size_t c) const { return rows[r * size + c]; }
};

// Row r (source location p_i) holds a Gaussian in the distance between each
// target location and pi(H p_i). Rows whose projection leaves the frame (or
// hits infinity) are uniform and flagged.
inline TargetAttentionMap target_attention_map(const Homography& h, int width, int height,
                                               double kernel_sigma) {
    if (kernel_sigma <= 0.0)
        throw Error(errc::config, "target_attention_map: sigma must be > 0");
    CorrespondenceGrid grid = correspondence_grid(h, width, height);
    const size_t n = grid.coords.size();
    TargetAttentionMap map;
    map.size = static_cast<int>(n);
    map.rows.assign(n * n, 0.0);
    map.uniform.assign(n, 0);

    const double inv_two_sigma2 = 1.0 / (2.0 * kernel_sigma * kernel_sigma);
    for (size_t r = 0; r < n; ++r) {
        double* row = map.rows.data() + r * n;
        if (!grid.valid[r] || !grid.in_frame[r]) {
            map.uniform[r] = 1;
            std::fill(row, row + n, 1.0 / static_cast<double>(n));
            continue;
        }
        const Vec2& p = grid.coords[r];
        double total = 0.0;
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                double dx = x - p.x, dy = y - p.y;
                double w = std::exp(-(dx * dx + dy * dy) * inv_two_sigma2);
                row[static_cast<size_t>(y) * width + x] = w;
                total += w;
            }
        if (total <= 0.0) {
            map.uniform[r] = 1;
            std::fill(row, row + n, 1.0 / static_cast<double>(n));
            continue;
        }
        for (size_t c = 0; c < n; ++c) row[c] /= total;
    }
    return map;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Sum over pairs of Frobenius norms ||P - T||_F; zero iff every pair matches.
inline double geo_consistency_loss(const std::vector<TargetAttentionMap>& pred,
                                   const std::vector<TargetAttentionMap>& target) {
    if (pred.size() != target.size())
        throw Error(errc::domain, "geo_consistency_loss: list length mismatch");
    double total = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i].size != target[i].size || pred[i].rows.size() != target[i].rows.size())
            throw Error(errc::domain, "geo_consistency_loss: shape mismatch");
        double acc = 0.0;
        for (size_t j = 0; j < pred[i].rows.size(); ++j) {
            double d = pred[i].rows[j] - target[i].rows[j];
            acc += d * d;
        }
        total += std::sqrt(acc);
    }
    return total;
}

// Mean squared error between the drawn noise and the model's prediction.
// Mean (not sum) reduction keeps the alpha/beta balance resolution-free.
inline double denoising_loss(std::span<const double> epsilon,
                             std::span<const double> epsilon_pred) {
    if (epsilon.size() != epsilon_pred.size() || epsilon.empty())
        throw Error(errc::domain, "denoising_loss: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < epsilon.size(); ++i) {
        double d = epsilon[i] - epsilon_pred[i];
        acc += d * d;
    }
    return acc / static_cast<double>(epsilon.size());
}

// Sum_l lambda_l * ||phi_l(pred) - phi_l(target)||_2 over externally supplied
// feature pyramids.
inline double perceptual_loss(const std::vector<FeatureGrid>& feat_pred,
                              const std::vector<FeatureGrid>& feat_target,
                              const std::vector<double>& lambdas) {
    if (feat_pred.size() != feat_target.size() || feat_pred.size() != lambdas.size())
        throw Error(errc::domain, "perceptual_loss: list length mismatch");
    double total = 0.0;
    for (size_t l = 0; l < feat_pred.size(); ++l) {
        if (!feat_pred[l].same_shape(feat_target[l]))
            throw Error(errc::domain, "perceptual_loss: layer shape mismatch");
        if (lambdas[l] < 0.0)
            throw Error(errc::domain, "perceptual_loss: negative layer weight");
        double acc = 0.0;
        for (size_t i = 0; i < feat_pred[l].data.size(); ++i) {
            double d = feat_pred[l].data[i] - feat_target[l].data[i];
            acc += d * d;
        }
        total += lambdas[l] * std::sqrt(acc);
    }
    return total;
}

// L_total = L_main + alpha * L_geo + beta * L_perceptual.
inline double total_loss(double main, double geo, double perceptual,
                         const LossWeights& w = {}) {
    if (main < 0.0 || geo < 0.0 || perceptual < 0.0)
        throw Error(errc::domain, "total_loss: loss terms must be nonnegative");
    return main + w.alpha * geo + w.beta * perceptual;
}

// ---------------------------------------------------------------------------
// Built-in pyramid feature extractor
// ---------------------------------------------------------------------------

// Pluggable stand-in for a learned feature stack: per level, smoothed luma
// and gradient magnitude at halving resolution (2 channels each).
inline std::vector<FeatureGrid> pyramid_feature_extract(const ImageRGB& image, int levels = 3) {
    if (levels < 1) throw Error(errc::config, "pyramid_feature_extract: need >= 1 level");
    std::vector<FeatureGrid> out;
    ImageF luma = to_luma(image);
    for (int l = 0; l < levels; ++l) {
        ImageF smooth = gaussian_blur(luma, 1.0);
        FeatureGrid grid(smooth.height, smooth.width, 2);
        for (int y = 0; y < smooth.height; ++y)
            for (int x = 0; x < smooth.width; ++x) {
                double gx = 0.5 * (smooth.at_clamped(x + 1, y) - smooth.at_clamped(x - 1, y));
                double gy = 0.5 * (smooth.at_clamped(x, y + 1) - smooth.at_clamped(x, y - 1));
                double* f = grid.at(x, y);
                f[0] = smooth.at(x, y);
                f[1] = std::sqrt(gx * gx + gy * gy);
            }
        out.push_back(std::move(grid));
        if (l + 1 < levels) luma = downsample_half(smooth);
    }
    return out;
}

}  // namespace viewstitch
