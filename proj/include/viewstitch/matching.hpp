#pragma once

// Descriptor matching with Lowe's ratio test, robust homography estimation
// (seeded RANSAC + normalized DLT refit), and the consistency-gated selection
// of the base homography between the geometric and feature-based estimates.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "viewstitch/common.hpp"
#include "viewstitch/features.hpp"
#include "viewstitch/geometry.hpp"

namespace viewstitch {

// ---------------------------------------------------------------------------
// Match set
// ---------------------------------------------------------------------------

struct Match {
    int src_index = -1;  // into the source keypoint/descriptor arrays
    int ref_index = -1;  // into the reference arrays
    double d1 = 0.0;     // nearest descriptor distance
    double d2 = 0.0;     // second-nearest distance; d1 <= d2
};

struct MatchSet {
    std::vector<Match> pairs;

    size_t size() const { return pairs.size(); }
    bool empty() const { return pairs.empty(); }
};

struct MatchConfig {
    double ratio = 0.75;          // keep m iff d1/d2 < ratio
    int brute_force_below = 256;  // skip the tree for small reference sets
};

namespace detail {

// Exact 2-nearest-neighbour search over descriptors. A vantage-point tree
// with triangle-inequality pruning; results are identical to brute force
// (ties resolved toward the lower index) because subtrees are only skipped
// when their distance bound strictly exceeds the current second-best.
class VpTree {
public:
    explicit VpTree(const std::vector<Descriptor>& items) : items_(items) {
        if (items_.empty()) return;
        std::vector<int> idx(items_.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        nodes_.reserve(items_.size());
        root_ = build(idx, 0, static_cast<int>(idx.size()));
    }

    struct Result {
        int idx1 = -1;
        double d1 = std::numeric_limits<double>::infinity();
        double d2 = std::numeric_limits<double>::infinity();
        int idx2 = -1;
    };

    Result search(const Descriptor& q) const {
        Result r;
        if (root_ >= 0) query(root_, q, r);
        return r;
    }

private:
    struct Node {
        int point = -1;
        double radius = 0.0;
        int inside = -1;
        int outside = -1;
    };

    int build(std::vector<int>& idx, int lo, int hi) {
        if (lo >= hi) return -1;
        Node node;
        node.point = idx[lo];  // deterministic vantage choice
        int n = hi - lo - 1;
        if (n > 0) {
            std::vector<std::pair<double, int>> dist;
            dist.reserve(n);
            for (int i = lo + 1; i < hi; ++i)
                dist.emplace_back(items_[node.point].distance(items_[idx[i]]), idx[i]);
            std::sort(dist.begin(), dist.end());
            int mid = n / 2;
            node.radius = dist[mid].first;
            for (int i = 0; i < n; ++i) idx[lo + 1 + i] = dist[i].second;
            int self = static_cast<int>(nodes_.size());
            nodes_.push_back(node);
            int inside = build(idx, lo + 1, lo + 1 + mid);
            int outside = build(idx, lo + 1 + mid, hi);
            nodes_[self].inside = inside;
            nodes_[self].outside = outside;
            return self;
        }
        nodes_.push_back(node);
        return static_cast<int>(nodes_.size()) - 1;
    }

    static void offer(Result& r, double d, int idx) {
        // Lexicographic (distance, index) so ties agree with brute force.
        if (d < r.d1 || (d == r.d1 && idx < r.idx1)) {
            r.d2 = r.d1;
            r.idx2 = r.idx1;
            r.d1 = d;
            r.idx1 = idx;
        } else if (d < r.d2 || (d == r.d2 && idx < r.idx2)) {
            r.d2 = d;
            r.idx2 = idx;
        }
    }

    void query(int node_id, const Descriptor& q, Result& r) const {
        const Node& node = nodes_[node_id];
        double d = q.distance(items_[node.point]);
        offer(r, d, node.point);
        bool go_inside_first = d < node.radius;
        for (int pass = 0; pass < 2; ++pass) {
            bool inside = go_inside_first == (pass == 0);
            int child = inside ? node.inside : node.outside;
            if (child < 0) continue;
            // Lower bound on distances within the child region.
            double bound = inside ? d - node.radius : node.radius - d;
            if (bound > r.d2) continue;
            query(child, q, r);
        }
    }

    const std::vector<Descriptor>& items_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace detail

// Nearest/second-nearest computed exactly over all of `ref`; a pair is kept
// iff d1/d2 < ratio.
inline MatchSet match_descriptors(const std::vector<Descriptor>& src,
                                  const std::vector<Descriptor>& ref,
                                  const MatchConfig& cfg = {}) {
    if (ref.size() < 2)
        throw Error(errc::domain, "match_descriptors: need at least 2 reference descriptors");

    MatchSet out;
    auto keep = [&](int i, const detail::VpTree::Result& r) {
        if (r.idx1 < 0 || r.idx2 < 0) return;
        if (r.d1 < cfg.ratio * r.d2)
            out.pairs.push_back({i, r.idx1, r.d1, r.d2});
    };

    if (ref.size() < static_cast<size_t>(cfg.brute_force_below)) {
        for (size_t i = 0; i < src.size(); ++i) {
            detail::VpTree::Result r;
            for (size_t j = 0; j < ref.size(); ++j) {
                double d = src[i].distance(ref[j]);
                if (d < r.d1 || (d == r.d1 && static_cast<int>(j) < r.idx1)) {
                    r.d2 = r.d1;
                    r.idx2 = r.idx1;
                    r.d1 = d;
                    r.idx1 = static_cast<int>(j);
                } else if (d < r.d2 || (d == r.d2 && static_cast<int>(j) < r.idx2)) {
                    r.d2 = d;
                    r.idx2 = static_cast<int>(j);
                }
            }
            keep(static_cast<int>(i), r);
        }
        return out;
    }

    detail::VpTree tree(ref);
    for (size_t i = 0; i < src.size(); ++i) keep(static_cast<int>(i), tree.search(src[i]));
    return out;
}

// ---------------------------------------------------------------------------
// Homography fitting
// ---------------------------------------------------------------------------

namespace detail {

// Smallest-eigenvalue eigenvector of a symmetric matrix via cyclic Jacobi
// rotations. Deterministic; plenty for the 9x9 normal equations of the DLT.
template <int N>
inline std::array<double, N> symmetric_min_eigenvector(std::array<std::array<double, N>, N> a) {
    std::array<std::array<double, N>, N> v{};
    for (int i = 0; i < N; ++i) v[i][i] = 1.0;

    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < N; ++p)
            for (int q = p + 1; q < N; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-24) break;
        for (int p = 0; p < N; ++p) {
            for (int q = p + 1; q < N; ++q) {
                if (std::abs(a[p][q]) < 1e-30) continue;
                double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < N; ++k) {
                    double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < N; ++k) {
                    double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (int k = 0; k < N; ++k) {
                    double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    int best = 0;
    for (int i = 1; i < N; ++i)
        if (a[i][i] < a[best][best]) best = i;
    std::array<double, N> out{};
    for (int i = 0; i < N; ++i) out[i] = v[i][best];
    return out;
}

inline Mat3 normalization_transform(const std::vector<Vec2>& pts) {
    Vec2 mean{0, 0};
    for (const Vec2& p : pts) mean += p;
    mean = mean / static_cast<double>(pts.size());
    double dist = 0.0;
    for (const Vec2& p : pts) dist += (p - mean).norm();
    dist /= static_cast<double>(pts.size());
    double scale = dist > 1e-12 ? std::sqrt(2.0) / dist : 1.0;
    Mat3 t;
    t.m = {scale, 0, -scale * mean.x, 0, scale, -scale * mean.y, 0, 0, 1};
    return t;
}

// Direct linear transform with Hartley normalization. Returns false when the
// configuration is degenerate.
inline bool fit_homography_dlt(const std::vector<Vec2>& src, const std::vector<Vec2>& dst,
                               Mat3& h_out) {
    const size_t n = src.size();
    if (n < 4 || dst.size() != n) return false;

    Mat3 t1 = normalization_transform(src);
    Mat3 t2 = normalization_transform(dst);

    std::array<std::array<double, 9>, 9> m{};
    for (size_t i = 0; i < n; ++i) {
        Vec3 sp = t1 * Vec3{src[i].x, src[i].y, 1.0};
        Vec3 dp = t2 * Vec3{dst[i].x, dst[i].y, 1.0};
        double x = sp.x, y = sp.y, u = dp.x, v = dp.y;
        double rows[2][9] = {
            {-x, -y, -1, 0, 0, 0, u * x, u * y, u},
            {0, 0, 0, -x, -y, -1, v * x, v * y, v},
        };
        for (const double* row : {rows[0], rows[1]})
            for (int a = 0; a < 9; ++a)
                for (int b = 0; b < 9; ++b) m[a][b] += row[a] * row[b];
    }

    std::array<double, 9> h = symmetric_min_eigenvector<9>(m);
    Mat3 hn;
    for (int i = 0; i < 9; ++i) hn.m[i] = h[i];
    if (std::abs(hn.det()) < 1e-12 * std::pow(hn.max_abs(), 3)) return false;

    h_out = t2.inverse() * hn * t1;
    double scale = h_out.max_abs();
    if (!(scale > 0.0) || !std::isfinite(scale)) return false;
    return true;
}

inline bool three_collinear(const Vec2& a, const Vec2& b, const Vec2& c, double eps = 1e-6) {
    return std::abs((b - a).cross(c - a)) < eps;
}

inline bool sample_degenerate(const std::vector<Vec2>& pts) {
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            for (int k = j + 1; k < 4; ++k)
                if (three_collinear(pts[i], pts[j], pts[k])) return true;
    return false;
}

}  // namespace detail

struct RansacConfig {
    int iterations = 2000;
    double inlier_threshold_px = 3.0;
    uint64_t seed = 0;
};

struct RansacResult {
    Homography homography;
    std::vector<uint8_t> inlier_mask;  // aligned with the match set
    int inlier_count = 0;
};

// Random-sample consensus over 4-point minimal sets, refit by normalized DLT
// on the consensus set, inlier mask recomputed under the returned model so
// the mask and homography always agree. Bitwise deterministic for a fixed
// seed and input order.
inline RansacResult estimate_homography_ransac(const MatchSet& matches,
                                               const std::vector<Keypoint>& kp_src,
                                               const std::vector<Keypoint>& kp_ref,
                                               const RansacConfig& cfg = {}) {
    const size_t n = matches.size();
    if (n < 4) throw Error(errc::domain, "estimate_homography_ransac: insufficient matches");

    std::vector<Vec2> src(n), dst(n);
    for (size_t i = 0; i < n; ++i) {
        src[i] = kp_src[matches.pairs[i].src_index].position;
        dst[i] = kp_ref[matches.pairs[i].ref_index].position;
    }

    auto count_inliers = [&](const Mat3& h, std::vector<uint8_t>* mask, double* sum_err2) {
        int count = 0;
        double err_acc = 0.0;
        const double thr2 = cfg.inlier_threshold_px * cfg.inlier_threshold_px;
        for (size_t i = 0; i < n; ++i) {
            Vec2 p;
            bool ok = project_point(h, src[i], p);
            double e2 = ok ? (p - dst[i]).dot(p - dst[i])
                           : std::numeric_limits<double>::infinity();
            bool in = ok && e2 <= thr2;
            if (mask) (*mask)[i] = in ? 1 : 0;
            if (in) {
                ++count;
                err_acc += e2;
            }
        }
        if (sum_err2) *sum_err2 = err_acc;
        return count;
    };

    SeededRng rng(mix_seed(cfg.seed, 0x7a05acULL));
    Mat3 best_h;
    int best_count = -1;
    double best_err = std::numeric_limits<double>::infinity();
    bool any_valid_sample = false;

    std::vector<Vec2> s4(4), d4(4);
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        size_t pick[4];
        pick[0] = rng.bounded(n);
        do { pick[1] = rng.bounded(n); } while (pick[1] == pick[0]);
        do { pick[2] = rng.bounded(n); } while (pick[2] == pick[0] || pick[2] == pick[1]);
        do {
            pick[3] = rng.bounded(n);
        } while (pick[3] == pick[0] || pick[3] == pick[1] || pick[3] == pick[2]);

        for (int i = 0; i < 4; ++i) {
            s4[i] = src[pick[i]];
            d4[i] = dst[pick[i]];
        }
        if (detail::sample_degenerate(s4) || detail::sample_degenerate(d4)) continue;

        Mat3 h;
        if (!detail::fit_homography_dlt(s4, d4, h)) continue;
        any_valid_sample = true;

        double err = 0.0;
        int count = count_inliers(h, nullptr, &err);
        if (count > best_count || (count == best_count && err < best_err)) {
            best_count = count;
            best_err = err;
            best_h = h;
        }
    }

    if (!any_valid_sample)
        throw Error(errc::domain, "estimate_homography_ransac: degenerate configuration");

    RansacResult out;
    out.inlier_mask.assign(n, 0);
    count_inliers(best_h, &out.inlier_mask, nullptr);

    // Refit on the consensus set, then recompute the mask under the refit.
    std::vector<Vec2> in_src, in_dst;
    for (size_t i = 0; i < n; ++i)
        if (out.inlier_mask[i]) {
            in_src.push_back(src[i]);
            in_dst.push_back(dst[i]);
        }
    Mat3 refit;
    if (in_src.size() >= 4 && detail::fit_homography_dlt(in_src, in_dst, refit)) {
        int refit_count = count_inliers(refit, nullptr, nullptr);
        if (refit_count >= std::max(4, best_count / 2)) best_h = refit;
    }
    out.inlier_count = count_inliers(best_h, &out.inlier_mask, nullptr);
    out.homography = Homography(best_h, HomographyProvenance::feature);
    return out;
}

// ---------------------------------------------------------------------------
// Consistency scoring and base selection
// ---------------------------------------------------------------------------

enum class ConsistencyVerdict { consistent, partially_consistent, inconsistent };

inline const char* to_string(ConsistencyVerdict v) {
    switch (v) {
        case ConsistencyVerdict::consistent: return "consistent";
        case ConsistencyVerdict::partially_consistent: return "partially_consistent";
        case ConsistencyVerdict::inconsistent: return "inconsistent";
    }
    return "unknown";
}

struct ConsistencyThresholds {
    double t_low = 5.0;    // px of mean corner error: below this, consistent
    double t_high = 30.0;  // above this, inconsistent
};

struct ConsistencyScore {
    double mean_corner_error = 0.0;  // px
    ConsistencyVerdict verdict = ConsistencyVerdict::inconsistent;
    std::string reason;
};

// Mean distance between the two transfers of the four domain corners. The
// domain is the full frame when the views mostly coincide, or the matched
// overlap rectangle when they only share a band.
inline ConsistencyScore homography_consistency(const Homography& h_geom,
                                               const Homography& h_feat,
                                               const RectDomain& domain,
                                               const ConsistencyThresholds& thr = {}) {
    ConsistencyScore score;
    if (!check_homography(h_geom, domain).valid) {
        score.reason = "geometric homography invalid";
        score.mean_corner_error = std::numeric_limits<double>::infinity();
        return score;
    }
    if (!check_homography(h_feat, domain).valid) {
        score.reason = "feature homography invalid";
        score.mean_corner_error = std::numeric_limits<double>::infinity();
        return score;
    }
    const std::array<Vec2, 4> corners = domain.corners();
    double total = 0.0;
    for (const Vec2& c : corners) {
        Vec2 a, b;
        if (!project_point(h_geom.m, c, a) || !project_point(h_feat.m, c, b)) {
            score.reason = "corner at infinity";
            score.mean_corner_error = std::numeric_limits<double>::infinity();
            return score;
        }
        total += (a - b).norm();
    }
    score.mean_corner_error = total / 4.0;
    if (score.mean_corner_error < thr.t_low)
        score.verdict = ConsistencyVerdict::consistent;
    else if (score.mean_corner_error < thr.t_high)
        score.verdict = ConsistencyVerdict::partially_consistent;
    else
        score.reason = "corner error above t_high";
    return score;
}

inline ConsistencyScore homography_consistency(const Homography& h_geom,
                                               const Homography& h_feat,
                                               double width, double height,
                                               const ConsistencyThresholds& thr = {}) {
    return homography_consistency(h_geom, h_feat, RectDomain{0, 0, width, height}, thr);
}

struct BaseSelectionConfig {
    int min_matches = 10;
    ConsistencyThresholds thresholds;
    HomographyCheckConfig check;
};

struct BaseSelection {
    Homography homography;
    double alpha = 0.0;  // weight on the geometric estimate actually used
    ConsistencyVerdict verdict = ConsistencyVerdict::inconsistent;
};

// Three-case rule. The feature estimate participates only when it is backed
// by enough matches and is itself a valid map:
//   consistent            -> feature homography
//   partially consistent  -> element-wise blend alpha*H_geom + (1-alpha)*H_feat
//                            on h33-normalized matrices,
//                            alpha = clamp((err - t_low) / (t_high - t_low), 0, 1)
//   otherwise             -> geometric homography
// The blend is re-checked and falls back to the geometric map when invalid.
inline BaseSelection select_base_homography(const Homography& h_geom, const Homography& h_feat,
                                            const MatchSet& matches,
                                            const ConsistencyScore& score,
                                            const RectDomain& domain,
                                            const BaseSelectionConfig& cfg = {}) {
    BaseSelection out;
    out.verdict = score.verdict;
    out.homography = h_geom;
    out.alpha = 1.0;

    bool feature_usable = matches.size() >= static_cast<size_t>(cfg.min_matches) &&
                          check_homography(h_feat, domain, cfg.check).valid;
    if (!feature_usable) return out;

    if (score.verdict == ConsistencyVerdict::consistent) {
        out.homography = h_feat;
        out.homography.provenance = HomographyProvenance::feature;
        out.alpha = 0.0;
        return out;
    }
    if (score.verdict == ConsistencyVerdict::partially_consistent) {
        double span = cfg.thresholds.t_high - cfg.thresholds.t_low;
        double alpha = span > 0.0
                           ? std::clamp((score.mean_corner_error - cfg.thresholds.t_low) / span,
                                        0.0, 1.0)
                           : 1.0;
        Homography g = h_geom;
        Homography f = h_feat;
        g.normalize();
        f.normalize();
        Homography blended(g.m * alpha + f.m * (1.0 - alpha), HomographyProvenance::blended);
        if (check_homography(blended, domain, cfg.check).valid) {
            out.homography = blended;
            out.alpha = alpha;
            return out;
        }
    }
    return out;  // geometric fallback
}

inline BaseSelection select_base_homography(const Homography& h_geom, const Homography& h_feat,
                                            const MatchSet& matches,
                                            const ConsistencyScore& score,
                                            double width, double height,
                                            const BaseSelectionConfig& cfg = {}) {
    return select_base_homography(h_geom, h_feat, matches, score,
                                  RectDomain{0, 0, width, height}, cfg);
}

}  // namespace viewstitch
