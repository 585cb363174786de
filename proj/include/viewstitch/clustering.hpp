#pragma once

// Density clustering of matched keypoints into objects, per-cluster
// descriptors and weights, the closed-form weighted centroid-offset solve,
// and composition of the aligned homography.

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

#include "viewstitch/common.hpp"
#include "viewstitch/features.hpp"
#include "viewstitch/geometry.hpp"
#include "viewstitch/matching.hpp"

namespace viewstitch {

// ---------------------------------------------------------------------------
// DBSCAN
// ---------------------------------------------------------------------------

struct ClusterConfig {
    double eps = 30.0;   // px at the 1600x900 working resolution
    int min_samples = 5;

    // eps scales linearly with the image diagonal relative to the reference
    // resolution the defaults were chosen at.
    double eps_for_diagonal(double diag) const {
        constexpr double kReferenceDiag = 1834.3865;  // hypot(1600, 900)
        return eps * diag / kReferenceDiag;
    }
};

inline constexpr int kNoise = -1;

// Classic density clustering. Core point: >= min_samples neighbours within
// eps, itself included. Clusters are maximal density-connected sets; border
// points join the first cluster that reaches them, with seeds and queues
// processed in ascending index order so the labeling is deterministic.
inline std::vector<int> dbscan(const std::vector<Vec2>& points, const ClusterConfig& cfg) {
    const int n = static_cast<int>(points.size());
    std::vector<int> labels(n, kNoise);
    if (n == 0) return labels;
    if (cfg.eps <= 0.0 || cfg.min_samples < 1)
        throw Error(errc::config, "dbscan: eps must be > 0 and min_samples >= 1");

    const double eps2 = cfg.eps * cfg.eps;
    auto neighbours = [&](int i) {
        std::vector<int> out;
        for (int j = 0; j < n; ++j) {
            Vec2 d = points[i] - points[j];
            if (d.dot(d) <= eps2) out.push_back(j);
        }
        return out;
    };

    std::vector<char> core(n, 0);
    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i < n; ++i) {
        adj[i] = neighbours(i);
        core[i] = static_cast<int>(adj[i].size()) >= cfg.min_samples;
    }

    int next_cluster = 0;
    std::vector<char> visited(n, 0);
    for (int seed = 0; seed < n; ++seed) {
        if (visited[seed] || !core[seed]) continue;
        int cluster = next_cluster++;
        std::queue<int> frontier;
        frontier.push(seed);
        visited[seed] = 1;
        labels[seed] = cluster;
        while (!frontier.empty()) {
            int p = frontier.front();
            frontier.pop();
            for (int q : adj[p]) {
                if (labels[q] == kNoise) labels[q] = cluster;  // border adoption
                if (!visited[q] && core[q]) {
                    visited[q] = 1;
                    labels[q] = cluster;
                    frontier.push(q);
                }
            }
        }
    }
    return labels;
}

// ---------------------------------------------------------------------------
// Cluster descriptors
// ---------------------------------------------------------------------------

enum class ObjectType { generic, compact, elongated };

inline const char* to_string(ObjectType t) {
    switch (t) {
        case ObjectType::generic: return "generic";
        case ObjectType::compact: return "compact";
        case ObjectType::elongated: return "elongated";
    }
    return "unknown";
}

struct BBox {
    double min_x = 0, min_y = 0, max_x = 0, max_y = 0;

    double width() const { return max_x - min_x; }
    double height() const { return max_y - min_y; }
    double area() const { return width() * height(); }
};

struct ObjectCluster {
    Vec2 center_src;
    Vec2 center_ref;
    BBox bbox;               // over source-image members
    double confidence = 0.0;
    ObjectType type_label = ObjectType::generic;
    int point_count = 0;
};

struct ObjectWeightConfig {
    double type_weight_compact = 1.2;
    double type_weight_elongated = 1.1;
    double type_weight_generic = 1.0;
    double elongated_aspect = 3.0;    // max/min bbox side ratio
    double compact_max_dim_px = 60.0; // both sides at or below this
    double density_min = 0.5;
    double density_max = 2.0;
};

inline double type_weight(ObjectType t, const ObjectWeightConfig& cfg) {
    switch (t) {
        case ObjectType::compact: return cfg.type_weight_compact;
        case ObjectType::elongated: return cfg.type_weight_elongated;
        case ObjectType::generic: return cfg.type_weight_generic;
    }
    return 1.0;
}

// point density per kilopixel of bbox area, clamped so one dense cluster
// cannot dominate the alignment solve.
inline double density_factor(int point_count, const BBox& bbox, const ObjectWeightConfig& cfg) {
    double kilopixels = std::max(bbox.area(), 1.0) / 1000.0;
    return std::clamp(point_count / kilopixels, cfg.density_min, cfg.density_max);
}

// Builds per-cluster descriptors from labeled matches. `labels` comes from
// dbscan over the source-image positions of the matched pairs; `inlier_mask`
// (aligned with matches, may be empty) feeds the confidence = inlier share.
inline std::vector<ObjectCluster> build_clusters(const MatchSet& matches,
                                                 const std::vector<Keypoint>& kp_src,
                                                 const std::vector<Keypoint>& kp_ref,
                                                 const std::vector<int>& labels,
                                                 const std::vector<uint8_t>& inlier_mask,
                                                 const ObjectWeightConfig& cfg = {}) {
    if (labels.size() != matches.size())
        throw Error(errc::domain, "build_clusters: labels do not match the match set");

    int max_label = -1;
    for (int l : labels) max_label = std::max(max_label, l);
    std::vector<ObjectCluster> clusters(static_cast<size_t>(max_label + 1));
    std::vector<int> inliers(static_cast<size_t>(max_label + 1), 0);

    for (size_t i = 0; i < labels.size(); ++i) {
        int l = labels[i];
        if (l < 0) continue;
        ObjectCluster& c = clusters[l];
        const Vec2& ps = kp_src[matches.pairs[i].src_index].position;
        const Vec2& pr = kp_ref[matches.pairs[i].ref_index].position;
        if (c.point_count == 0) {
            c.bbox = {ps.x, ps.y, ps.x, ps.y};
        } else {
            c.bbox.min_x = std::min(c.bbox.min_x, ps.x);
            c.bbox.min_y = std::min(c.bbox.min_y, ps.y);
            c.bbox.max_x = std::max(c.bbox.max_x, ps.x);
            c.bbox.max_y = std::max(c.bbox.max_y, ps.y);
        }
        c.center_src += ps;
        c.center_ref += pr;
        c.point_count += 1;
        if (!inlier_mask.empty() && inlier_mask[i]) inliers[l] += 1;
    }

    for (size_t l = 0; l < clusters.size(); ++l) {
        ObjectCluster& c = clusters[l];
        if (c.point_count == 0) continue;
        c.center_src = c.center_src / c.point_count;
        c.center_ref = c.center_ref / c.point_count;
        c.confidence = inlier_mask.empty()
                           ? 1.0
                           : static_cast<double>(inliers[l]) / c.point_count;
        double mx = std::max(c.bbox.width(), c.bbox.height());
        double mn = std::max(std::min(c.bbox.width(), c.bbox.height()), 1.0);
        if (mx / mn >= cfg.elongated_aspect)
            c.type_label = ObjectType::elongated;
        else if (mx <= cfg.compact_max_dim_px)
            c.type_label = ObjectType::compact;
        else
            c.type_label = ObjectType::generic;
    }
    // Empty slots cannot occur: dbscan only creates labels with members.
    return clusters;
}

inline std::vector<double> alignment_weights(const std::vector<ObjectCluster>& clusters,
                                             const ObjectWeightConfig& cfg = {}) {
    std::vector<double> w;
    w.reserve(clusters.size());
    for (const ObjectCluster& c : clusters)
        w.push_back(c.confidence * type_weight(c.type_label, cfg) *
                    density_factor(c.point_count, c.bbox, cfg));
    return w;
}

// ---------------------------------------------------------------------------
// Alignment solve
// ---------------------------------------------------------------------------

// argmin_dt sum_j w_j || c_ref_j - (pi(H_base c_src_j) + dt) ||^2 has the
// closed form: the weighted mean residual. Clusters whose center projects to
// infinity are skipped.
inline Vec2 solve_alignment_offset(const std::vector<ObjectCluster>& clusters,
                                   const std::vector<double>& weights,
                                   const Homography& h_base) {
    if (weights.size() != clusters.size())
        throw Error(errc::domain, "solve_alignment_offset: weight/cluster count mismatch");
    Vec2 acc{0, 0};
    double total = 0.0;
    for (size_t j = 0; j < clusters.size(); ++j) {
        if (weights[j] < 0.0)
            throw Error(errc::domain, "solve_alignment_offset: negative weight");
        if (weights[j] == 0.0) continue;
        Vec2 mapped;
        if (!project_point(h_base.m, clusters[j].center_src, mapped)) continue;
        acc += (clusters[j].center_ref - mapped) * weights[j];
        total += weights[j];
    }
    if (total <= 0.0) throw Error(errc::domain, "solve_alignment_offset: no usable clusters");
    return acc / total;
}

// H_aligned = [[1,0,beta*dt.x],[0,1,beta*dt.y],[0,0,1]] * H_base.
inline Homography compose_aligned_homography(const Homography& h_base, const Vec2& delta_t,
                                             double beta) {
    if (beta < 0.0 || beta > 1.0)
        throw Error(errc::config, "compose_aligned_homography: beta must be in [0, 1]");
    Mat3 t = Mat3::identity();
    t(0, 2) = beta * delta_t.x;
    t(1, 2) = beta * delta_t.y;
    return Homography(t * h_base.m, HomographyProvenance::aligned);
}

}  // namespace viewstitch
