#pragma once

// Independent reference implementations used as test oracles. Everything in
// this header is deliberately written the slow, obvious way and must not call
// into the library code paths it checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

namespace oracle {

// --- plain 3x3 helpers (independent of viewstitch::Mat3) -------------------

using M3 = std::array<std::array<double, 3>, 3>;

inline M3 m3_mul(const M3& a, const M3& b) {
    M3 c{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += a[i][k] * b[k][j];
            c[i][j] = s;
        }
    return c;
}

inline M3 m3_rz(double t) {
    return {{{std::cos(t), -std::sin(t), 0}, {std::sin(t), std::cos(t), 0}, {0, 0, 1}}};
}

inline M3 m3_rx(double t) {
    return {{{1, 0, 0}, {0, std::cos(t), -std::sin(t)}, {0, std::sin(t), std::cos(t)}}};
}

// --- exact 2-nearest-neighbour search ---------------------------------------

struct TwoNN {
    int idx1 = -1;
    double d1 = std::numeric_limits<double>::infinity();
    double d2 = std::numeric_limits<double>::infinity();
};

// Ties resolved toward the lower index, matching the library contract.
inline TwoNN brute_force_2nn(const std::vector<float>& query,
                             const std::vector<std::vector<float>>& refs) {
    TwoNN out;
    int idx2 = -1;
    for (int j = 0; j < static_cast<int>(refs.size()); ++j) {
        double acc = 0.0;
        for (size_t k = 0; k < query.size(); ++k) {
            double d = static_cast<double>(query[k]) - refs[j][k];
            acc += d * d;
        }
        double dist = std::sqrt(acc);
        if (dist < out.d1) {
            out.d2 = out.d1;
            idx2 = out.idx1;
            out.d1 = dist;
            out.idx1 = j;
        } else if (dist < out.d2) {
            out.d2 = dist;
            idx2 = j;
        }
    }
    (void)idx2;
    return out;
}

// --- eps-graph connected components (DBSCAN oracle) -------------------------

// Core points: >= min_samples neighbours within eps (self included). Clusters
// are connected components of the eps-graph over core points; border points
// join the cluster of their first core neighbour in index order. Noise = -1.
inline std::vector<int> dbscan_reference(const std::vector<std::array<double, 2>>& pts,
                                         double eps, int min_samples) {
    const int n = static_cast<int>(pts.size());
    std::vector<int> labels(n, -1);
    if (n == 0) return labels;
    auto dist2 = [&](int a, int b) {
        double dx = pts[a][0] - pts[b][0], dy = pts[a][1] - pts[b][1];
        return dx * dx + dy * dy;
    };
    const double eps2 = eps * eps;
    std::vector<char> core(n, 0);
    for (int i = 0; i < n; ++i) {
        int cnt = 0;
        for (int j = 0; j < n; ++j)
            if (dist2(i, j) <= eps2) ++cnt;
        core[i] = cnt >= min_samples;
    }
    // Union-find over core points.
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (core[i] && core[j] && dist2(i, j) <= eps2) parent[find(i)] = find(j);
    // Assign cluster ids in order of first core appearance.
    int next_id = 0;
    std::map<int, int> root_to_id;
    for (int i = 0; i < n; ++i)
        if (core[i]) {
            int r = find(i);
            if (!root_to_id.count(r)) root_to_id[r] = next_id++;
            labels[i] = root_to_id[r];
        }
    for (int i = 0; i < n; ++i)
        if (!core[i]) {
            for (int j = 0; j < n; ++j)
                if (core[j] && dist2(i, j) <= eps2) {
                    labels[i] = labels[j];
                    break;
                }
        }
    return labels;
}

// Compares two labelings as partitions (ignoring label permutation).
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return false;
    std::map<int, int> fwd, bwd;
    for (size_t i = 0; i < a.size(); ++i) {
        if ((a[i] < 0) != (b[i] < 0)) return false;
        if (a[i] < 0) continue;
        auto f = fwd.find(a[i]);
        if (f == fwd.end())
            fwd[a[i]] = b[i];
        else if (f->second != b[i])
            return false;
        auto g = bwd.find(b[i]);
        if (g == bwd.end())
            bwd[b[i]] = a[i];
        else if (g->second != a[i])
            return false;
    }
    return true;
}

// --- brute-force Euclidean distance transform --------------------------------

// d(p) = distance to the nearest zero pixel, with everything outside the
// frame counting as zero. O(n^2) over pixels.
inline std::vector<double> distance_transform_reference(const std::vector<uint8_t>& mask,
                                                        int w, int h) {
    std::vector<double> d(static_cast<size_t>(w) * h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!mask[static_cast<size_t>(y) * w + x]) continue;
            double best2 = std::numeric_limits<double>::infinity();
            // Border: nearest outside pixel is axis-aligned.
            double border = std::min(std::min(x + 1, y + 1), std::min(w - x, h - y));
            best2 = border * border;
            for (int v = 0; v < h; ++v)
                for (int u = 0; u < w; ++u)
                    if (!mask[static_cast<size_t>(v) * w + u]) {
                        double dx = u - x, dy = v - y;
                        best2 = std::min(best2, dx * dx + dy * dy);
                    }
            d[static_cast<size_t>(y) * w + x] = std::sqrt(best2);
        }
    return d;
}

// --- dense softmax attention -------------------------------------------------

// One query row against all admitted keys; naive exponentials.
inline std::vector<double> attention_row_reference(const std::vector<double>& q,
                                                   const std::vector<std::vector<double>>& keys,
                                                   const std::vector<char>& admitted) {
    const size_t c = q.size();
    std::vector<double> logits;
    std::vector<size_t> which;
    for (size_t j = 0; j < keys.size(); ++j) {
        if (!admitted[j]) continue;
        double s = 0.0;
        for (size_t k = 0; k < c; ++k) s += q[k] * keys[j][k];
        logits.push_back(s / std::sqrt(static_cast<double>(c)));
        which.push_back(j);
    }
    std::vector<double> weights(keys.size(), 0.0);
    if (logits.empty()) return weights;
    double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double& l : logits) {
        l = std::exp(l - mx);
        z += l;
    }
    for (size_t i = 0; i < which.size(); ++i) weights[which[i]] = logits[i] / z;
    return weights;
}

// --- dense image metrics ------------------------------------------------------

// MAE/RMSE over all pixels and channels of two interleaved RGB buffers.
inline std::pair<double, double> dense_mae_rmse(const std::vector<uint8_t>& a,
                                                const std::vector<uint8_t>& b) {
    double abs_acc = 0.0, sq_acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        abs_acc += std::abs(d);
        sq_acc += d * d;
    }
    double n = static_cast<double>(a.size());
    return {abs_acc / n, std::sqrt(sq_acc / n)};
}

// Gaussian-window SSIM on luma, full (valid) windows only, no masking logic.
inline double dense_ssim(const std::vector<double>& luma_a, const std::vector<double>& luma_b,
                         int w, int h, int win = 11, double sigma = 1.5) {
    const int rad = win / 2;
    std::vector<double> g(static_cast<size_t>(win) * win);
    double gsum = 0.0;
    for (int dy = -rad; dy <= rad; ++dy)
        for (int dx = -rad; dx <= rad; ++dx) {
            double v = std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma));
            g[static_cast<size_t>(dy + rad) * win + (dx + rad)] = v;
            gsum += v;
        }
    for (double& v : g) v /= gsum;

    const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
    const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
    double total = 0.0;
    long count = 0;
    for (int y = rad; y < h - rad; ++y)
        for (int x = rad; x < w - rad; ++x) {
            double mu1 = 0.0, mu2 = 0.0;
            for (int dy = -rad; dy <= rad; ++dy)
                for (int dx = -rad; dx <= rad; ++dx) {
                    double gw = g[static_cast<size_t>(dy + rad) * win + (dx + rad)];
                    mu1 += gw * luma_a[static_cast<size_t>(y + dy) * w + (x + dx)];
                    mu2 += gw * luma_b[static_cast<size_t>(y + dy) * w + (x + dx)];
                }
            double v1 = 0.0, v2 = 0.0, cov = 0.0;
            for (int dy = -rad; dy <= rad; ++dy)
                for (int dx = -rad; dx <= rad; ++dx) {
                    double gw = g[static_cast<size_t>(dy + rad) * win + (dx + rad)];
                    double d1 = luma_a[static_cast<size_t>(y + dy) * w + (x + dx)] - mu1;
                    double d2 = luma_b[static_cast<size_t>(y + dy) * w + (x + dx)] - mu2;
                    v1 += gw * d1 * d1;
                    v2 += gw * d2 * d2;
                    cov += gw * d1 * d2;
                }
            total += ((2 * mu1 * mu2 + c1) * (2 * cov + c2)) /
                     ((mu1 * mu1 + mu2 * mu2 + c1) * (v1 + v2 + c2));
            ++count;
        }
    return total / static_cast<double>(count);
}

}  // namespace oracle
