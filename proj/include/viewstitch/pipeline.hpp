#pragma once

// The end-to-end stitch to an arbitrary target pose: per-source geometric
// homography with validity gating, feature-based refinement against the
// most-overlapping valid source, cluster alignment, and adaptive fusion.
// Disabling the refinement stages yields the geometric-only path through the
// same operations, which is the ablation baseline.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "viewstitch/clustering.hpp"
#include "viewstitch/common.hpp"
#include "viewstitch/features.hpp"
#include "viewstitch/fusion.hpp"
#include "viewstitch/geometry.hpp"
#include "viewstitch/image.hpp"
#include "viewstitch/matching.hpp"

namespace viewstitch {

struct StageToggles {
    bool feature_refinement = true;  // stage 2 (and 3, which depends on it)
    bool object_alignment = true;    // stage 3
};

struct StitchConfig {
    FeatureConfig features;
    MatchConfig matching;
    RansacConfig ransac;
    BaseSelectionConfig selection;
    ClusterConfig clustering;
    ObjectWeightConfig object_weights;
    double beta = 0.5;  // stage-3 adjustment strength
    FusionConfig fusion;
    StageToggles stages;
    HomographyCheckConfig check;
    uint64_t seed = 0;
};

namespace detail {

// Area of the intersection of two convex polygons (Sutherland-Hodgman clip).
// Both polygons must be wound consistently (positive signed area).
inline double convex_intersection_area(std::vector<Vec2> subject,
                                       const std::vector<Vec2>& clip) {
    for (size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
        const Vec2& a = clip[e];
        const Vec2& b = clip[(e + 1) % clip.size()];
        Vec2 edge = b - a;
        std::vector<Vec2> next;
        next.reserve(subject.size() + 2);
        for (size_t i = 0; i < subject.size(); ++i) {
            const Vec2& p = subject[i];
            const Vec2& q = subject[(i + 1) % subject.size()];
            double side_p = edge.cross(p - a);
            double side_q = edge.cross(q - a);
            bool in_p = side_p >= 0.0;
            bool in_q = side_q >= 0.0;
            if (in_p) next.push_back(p);
            if (in_p != in_q) {
                double t = side_p / (side_p - side_q);
                next.push_back(p + (q - p) * t);
            }
        }
        subject = std::move(next);
    }
    if (subject.size() < 3) return 0.0;
    double area = 0.0;
    for (size_t i = 0; i < subject.size(); ++i) {
        const Vec2& p = subject[i];
        const Vec2& q = subject[(i + 1) % subject.size()];
        area += p.x * q.y - q.x * p.y;
    }
    return 0.5 * std::abs(area);
}

// Warped corner quads come from check_homography with positive winding.
inline std::vector<Vec2> quad_vector(const std::array<Vec2, 4>& q) {
    return {q[0], q[1], q[2], q[3]};
}

// Bounding rectangle, in the source frame, of the pixels the target view
// actually samples (the preimage of the target frame under the stage-1 map).
// Stage-2 consistency runs on this domain: a refined map must behave sanely
// exactly where it will be used. For adjacent surround cameras parts of this
// region cross the reference camera's projective horizon, which correctly
// drives the full-homography replacement toward the geometric fallback and
// leaves the correction to the stage-3 translation.
inline RectDomain used_domain(const Mat3& to_target_inv, int src_w, int src_h,
                              int target_w, int target_h) {
    constexpr int kGrid = 32;
    RectDomain box{1e30, 1e30, -1e30, -1e30};
    int kept = 0;
    for (int gy = 0; gy <= kGrid; ++gy) {
        for (int gx = 0; gx <= kGrid; ++gx) {
            Vec2 t{target_w * static_cast<double>(gx) / kGrid,
                   target_h * static_cast<double>(gy) / kGrid};
            double w = to_target_inv.m[6] * t.x + to_target_inv.m[7] * t.y + to_target_inv.m[8];
            if (std::abs(w) < 1e-9) continue;
            Vec2 p{(to_target_inv.m[0] * t.x + to_target_inv.m[1] * t.y + to_target_inv.m[2]) / w,
                   (to_target_inv.m[3] * t.x + to_target_inv.m[4] * t.y + to_target_inv.m[5]) / w};
            if (p.x < 0 || p.y < 0 || p.x > src_w - 1 || p.y > src_h - 1) continue;
            box.x0 = std::min(box.x0, p.x);
            box.y0 = std::min(box.y0, p.y);
            box.x1 = std::max(box.x1, p.x);
            box.y1 = std::max(box.y1, p.y);
            ++kept;
        }
    }
    if (kept < 4 || box.width() < 8.0 || box.height() < 8.0)
        return RectDomain{0, 0, static_cast<double>(src_w), static_cast<double>(src_h)};
    return box;
}

}  // namespace detail

// Chooses the primary view: a rig camera flagged primary wins when present
// among the used sources, otherwise the source whose optical axis is closest
// to the target's.
inline int pick_primary_source(const std::vector<CameraModel>& cameras,
                               const std::vector<int>& used, const CameraModel& target) {
    for (int i : used)
        if (cameras[i].primary) return i;
    Vec3 target_axis = target.optical_axis_world();
    int best = -1;
    double best_dot = -2.0;
    for (int i : used) {
        double d = cameras[i].optical_axis_world().dot(target_axis);
        if (d > best_dot) {
            best_dot = d;
            best = i;
        }
    }
    return best;
}

// Stitches the rig images to the target pose. Deterministic given the config
// seed. Throws `pose_unsupported` when no source passes the validity gate.
inline StitchResult synthesize_view(const std::vector<ImageRGB>& images,
                                    const std::vector<CameraModel>& cameras,
                                    const CameraModel& target,
                                    const StitchConfig& cfg = {}) {
    if (images.empty() || images.size() != cameras.size())
        throw Error(errc::config, "synthesize_view: need one image per camera");
    const int out_w = target.width, out_h = target.height;
    if (out_w <= 0 || out_h <= 0)
        throw Error(errc::config, "synthesize_view: target frame size missing");

    const size_t n = images.size();
    std::vector<SourceDiagnostics> diagnostics(n);
    std::vector<Homography> geom(n);
    std::vector<ValidityReport> validity(n);
    std::vector<int> candidates;
    for (size_t i = 0; i < n; ++i) {
        diagnostics[i].name = cameras[i].name;
        geom[i] = camera_homography(cameras[i], target);
        validity[i] = check_homography(geom[i], images[i].width, images[i].height, cfg.check);
        if (validity[i].valid) {
            candidates.push_back(static_cast<int>(i));
        } else {
            diagnostics[i].note = "geometric homography rejected: " + validity[i].reason;
        }
    }
    if (candidates.empty())
        throw Error(errc::pose_unsupported, "target pose unsupported");

    // Lazy per-image feature cache; detection is the expensive part.
    std::vector<std::optional<FeatureSet>> feature_cache(n);
    auto features_of = [&](int i) -> const FeatureSet& {
        if (!feature_cache[i]) {
            FeatureConfig fc = cfg.features;
            feature_cache[i] = detect_features(images[i], fc);
        }
        return *feature_cache[i];
    };

    std::vector<Homography> final_h = geom;
    if (cfg.stages.feature_refinement && candidates.size() >= 2) {
        for (int i : candidates) {
            SourceDiagnostics& diag = diagnostics[i];
            // Reference: the other valid source overlapping most in the
            // target frame after the stage-1 warp.
            int ref = -1;
            double best_area = 0.0;
            for (int j : candidates) {
                if (j == i) continue;
                double area =
                    detail::convex_intersection_area(detail::quad_vector(validity[i].warped_corners),
                                                     detail::quad_vector(validity[j].warped_corners));
                if (area > best_area) {
                    best_area = area;
                    ref = j;
                }
            }
            if (ref < 0) {
                diag.note = "no overlapping reference source";
                continue;
            }

            const FeatureSet& fs_i = features_of(i);
            const FeatureSet& fs_j = features_of(ref);
            if (fs_i.descriptors.size() < 4 || fs_j.descriptors.size() < 2) {
                diag.note = "too few features for refinement";
                continue;
            }
            MatchSet matches = match_descriptors(fs_i.descriptors, fs_j.descriptors, cfg.matching);
            diag.match_count = static_cast<int>(matches.size());
            if (matches.size() < 4) {
                diag.note = "too few matches for refinement";
                continue;
            }

            // Geometric prediction of the i -> ref map, via the target frame.
            Homography g_ij(geom[ref].m.inverse() * geom[i].m, HomographyProvenance::geometric);
            RectDomain domain = detail::used_domain(geom[i].m.inverse(), images[i].width,
                                                    images[i].height, out_w, out_h);

            RansacConfig rc = cfg.ransac;
            rc.seed = mix_seed(cfg.seed, static_cast<uint64_t>(i) * 64 + ref);
            RansacResult ransac;
            try {
                ransac = estimate_homography_ransac(matches, fs_i.keypoints, fs_j.keypoints, rc);
            } catch (const Error& e) {
                diag.note = std::string("ransac failed: ") + e.what();
                continue;
            }
            diag.inlier_count = ransac.inlier_count;

            ConsistencyScore score = homography_consistency(g_ij, ransac.homography, domain,
                                                            cfg.selection.thresholds);
            BaseSelection base = select_base_homography(g_ij, ransac.homography, matches,
                                                        score, domain, cfg.selection);
            diag.alpha = base.alpha;

            // Stage 3 applies to whichever base came out of stage 2, the
            // geometric fallback included: the translation correction is
            // what a thin overlap band can support.
            Homography refined = base.homography;
            bool aligned = false;
            if (cfg.stages.object_alignment) {
                std::vector<Vec2> pts;
                pts.reserve(matches.size());
                for (const Match& m : matches.pairs)
                    pts.push_back(fs_i.keypoints[m.src_index].position);
                ClusterConfig cc = cfg.clustering;
                cc.eps = cfg.clustering.eps_for_diagonal(
                    std::hypot(images[i].width, images[i].height));
                std::vector<int> labels = dbscan(pts, cc);
                std::vector<ObjectCluster> clusters = build_clusters(
                    matches, fs_i.keypoints, fs_j.keypoints, labels, ransac.inlier_mask,
                    cfg.object_weights);
                if (!clusters.empty()) {
                    std::vector<double> weights =
                        alignment_weights(clusters, cfg.object_weights);
                    try {
                        Vec2 dt = solve_alignment_offset(clusters, weights, base.homography);
                        diag.delta_t = dt;
                        refined = compose_aligned_homography(base.homography, dt, cfg.beta);
                        aligned = true;
                    } catch (const Error&) {
                        // No usable clusters: keep the base homography.
                    }
                }
            }

            bool base_refined = base.homography.provenance != HomographyProvenance::geometric;
            if (!base_refined && !(aligned && diag.delta_t.norm() > 1e-9)) {
                diag.note = diag.note.empty() ? "refinement fell back to geometric" : diag.note;
                continue;
            }

            // Compose back to the target frame through the reference's
            // stage-1 map, then re-validate over the used region; fall back
            // to pure geometry if the refined map is broken.
            Homography to_target(geom[ref].m * refined.m, refined.provenance);
            if (check_homography(to_target, domain, cfg.check).valid &&
                check_homography(to_target, images[i].width, images[i].height, cfg.check)
                    .valid) {
                final_h[i] = to_target;
                diag.provenance = to_string(refined.provenance);
                if (base_refined)
                    diag.quality = matches.empty()
                                       ? 1.0
                                       : std::clamp(static_cast<double>(ransac.inlier_count) /
                                                        static_cast<double>(matches.size()),
                                                    0.0, 1.0);
            } else {
                diag.note = diag.note.empty() ? "refinement fell back to geometric" : diag.note;
            }
        }
    }

    // Stage 4: warp the survivors and fuse.
    std::vector<WarpedView> views;
    std::vector<int> used;
    for (int i : candidates) {
        WarpedView view;
        try {
            view = warp_perspective(images[i], final_h[i], out_w, out_h);
        } catch (const Error& e) {
            diagnostics[i].note = std::string("warp failed: ") + e.what();
            continue;
        }
        view.source_id = cameras[i].name;
        view.quality = diagnostics[i].quality;
        views.push_back(std::move(view));
        used.push_back(i);
        SourceDiagnostics& diag = diagnostics[i];
        diag.used = true;
        if (diag.provenance.empty()) diag.provenance = to_string(final_h[i].provenance);
    }
    if (views.empty()) throw Error(errc::pose_unsupported, "target pose unsupported");

    int primary = pick_primary_source(cameras, used, target);
    for (size_t k = 0; k < used.size(); ++k) views[k].is_primary = used[k] == primary;

    std::vector<WeightMap> weights = compute_fusion_weights(views, cfg.fusion);
    StitchResult result = blend(views, weights);
    result.sources = std::move(diagnostics);
    return result;
}

}  // namespace viewstitch
