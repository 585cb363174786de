#pragma once

// Extrapolated-view evaluation against sparse ground truth: colorize a point
// cloud from the rig cameras, project it into the target view with
// z-buffering, and score an image on the resulting sparse pixels with
// PSNR / SSIM / MAE / RMSE.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "viewstitch/common.hpp"
#include "viewstitch/geometry.hpp"
#include "viewstitch/image.hpp"

namespace viewstitch {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

struct ColoredPoint {
    Vec3 position;                   // world frame, meters
    std::array<uint8_t, 3> rgb{};
    std::string source_camera;       // camera the color came from; empty for ground truth
};

struct ColoredPointCloud {
    std::vector<ColoredPoint> points;

    bool empty() const { return points.empty(); }
    size_t size() const { return points.size(); }
};

struct SparseSample {
    int x = 0;
    int y = 0;
    std::array<uint8_t, 3> rgb{};
    double depth = 0.0;  // meters, > 0
};

// One z-buffered sample per pixel, all inside the frame.
struct SparseReference {
    int width = 0;
    int height = 0;
    std::vector<SparseSample> samples;

    double coverage() const {
        if (width <= 0 || height <= 0) return 0.0;
        return static_cast<double>(samples.size()) / (static_cast<double>(width) * height);
    }
};

struct SsimConfig {
    int window = 11;
    double sigma = 1.5;
    double min_coverage = 0.5;  // fraction of window pixels that must be valid
};

struct SparseMetrics {
    double psnr = 0.0;   // dB, capped at 100
    double ssim = 0.0;   // [-1, 1]
    double mae = 0.0;    // 8-bit units
    double rmse = 0.0;   // 8-bit units
    double coverage = 0.0;
};

inline constexpr double kPsnrCap = 100.0;

// ---------------------------------------------------------------------------
// Colorization
// ---------------------------------------------------------------------------

namespace detail {

// Min-depth per integer pixel over all projected points; tie breaks go to the
// earlier point so the reduction order is fixed.
inline std::vector<double> camera_depth_buffer(const std::vector<Vec3>& points,
                                               const CameraModel& cam) {
    std::vector<double> zbuf(static_cast<size_t>(cam.width) * cam.height,
                             std::numeric_limits<double>::infinity());
    for (const Vec3& p : points) {
        Vec2 px;
        double depth = 0.0;
        if (!cam.project(p, px, depth)) continue;
        if (!cam.in_frame(px)) continue;
        int ix = static_cast<int>(std::lround(px.x));
        int iy = static_cast<int>(std::lround(px.y));
        ix = std::clamp(ix, 0, cam.width - 1);
        iy = std::clamp(iy, 0, cam.height - 1);
        double& z = zbuf[static_cast<size_t>(iy) * cam.width + ix];
        if (depth < z) z = depth;
    }
    return zbuf;
}

}  // namespace detail

// Projects every point into every camera and keeps, per point, the color from
// the camera with the smallest angle between the point ray and the optical
// axis, among cameras where the point is in frame, in front, and wins its
// pixel's z-buffer. Ties on angle break by camera name order. Points visible
// nowhere are dropped.
inline ColoredPointCloud colorize_point_cloud(const std::vector<Vec3>& points,
                                              const std::vector<ImageRGB>& images,
                                              const std::vector<CameraModel>& cameras) {
    if (images.size() != cameras.size())
        throw Error(errc::config, "colorize_point_cloud: image/camera count mismatch");

    std::vector<size_t> order(cameras.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return cameras[a].name < cameras[b].name;
    });

    std::vector<std::vector<double>> zbufs(cameras.size());
    for (size_t c = 0; c < cameras.size(); ++c)
        zbufs[c] = detail::camera_depth_buffer(points, cameras[c]);

    constexpr double kDepthSlack = 1e-6;
    ColoredPointCloud cloud;
    for (const Vec3& p : points) {
        double best_angle = std::numeric_limits<double>::infinity();
        int best_cam = -1;
        Vec2 best_px;
        for (size_t oi = 0; oi < order.size(); ++oi) {
            size_t c = order[oi];
            const CameraModel& cam = cameras[c];
            Vec2 px;
            double depth = 0.0;
            if (!cam.project(p, px, depth)) continue;
            if (!cam.in_frame(px)) continue;
            int ix = static_cast<int>(std::lround(px.x));
            int iy = static_cast<int>(std::lround(px.y));
            ix = std::clamp(ix, 0, cam.width - 1);
            iy = std::clamp(iy, 0, cam.height - 1);
            double zmin = zbufs[c][static_cast<size_t>(iy) * cam.width + ix];
            if (depth > zmin * (1.0 + kDepthSlack) + kDepthSlack) continue;  // occluded
            Vec3 ray = (p - cam.center).normalized();
            double cosang = std::clamp(ray.dot(cam.optical_axis_world()), -1.0, 1.0);
            double angle = std::acos(cosang);
            if (angle < best_angle) {  // strict: earlier name wins ties
                best_angle = angle;
                best_cam = static_cast<int>(c);
                best_px = px;
            }
        }
        if (best_cam < 0) continue;
        const ImageRGB& img = images[best_cam];
        int ix = std::clamp(static_cast<int>(std::lround(best_px.x)), 0, img.width - 1);
        int iy = std::clamp(static_cast<int>(std::lround(best_px.y)), 0, img.height - 1);
        const uint8_t* px = img.px(ix, iy);
        cloud.points.push_back({p, {px[0], px[1], px[2]}, cameras[best_cam].name});
    }
    return cloud;
}

// ---------------------------------------------------------------------------
// Projection to a sparse reference
// ---------------------------------------------------------------------------

inline SparseReference project_sparse_reference(const ColoredPointCloud& cloud,
                                                const CameraModel& target,
                                                int width, int height) {
    if (width <= 0 || height <= 0)
        throw Error(errc::config, "project_sparse_reference: bad frame size");
    SparseReference ref;
    ref.width = width;
    ref.height = height;

    std::vector<int> winner(static_cast<size_t>(width) * height, -1);
    std::vector<double> depth_of(static_cast<size_t>(width) * height,
                                 std::numeric_limits<double>::infinity());
    CameraModel cam = target;
    cam.width = width;
    cam.height = height;
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        Vec2 px;
        double depth = 0.0;
        if (!cam.project(cloud.points[i].position, px, depth)) continue;
        if (!cam.in_frame(px)) continue;
        int ix = std::clamp(static_cast<int>(std::lround(px.x)), 0, width - 1);
        int iy = std::clamp(static_cast<int>(std::lround(px.y)), 0, height - 1);
        size_t idx = static_cast<size_t>(iy) * width + ix;
        if (depth < depth_of[idx]) {
            depth_of[idx] = depth;
            winner[idx] = static_cast<int>(i);
        }
    }
    for (size_t idx = 0; idx < winner.size(); ++idx) {
        if (winner[idx] < 0) continue;
        const ColoredPoint& p = cloud.points[winner[idx]];
        ref.samples.push_back({static_cast<int>(idx % width), static_cast<int>(idx / width),
                               p.rgb, depth_of[idx]});
    }
    return ref;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

namespace detail {

inline void require_reference(const SparseReference& ref, const ImageRGB& image) {
    if (ref.samples.empty()) throw Error(errc::no_reference, "no reference samples");
    if (image.width != ref.width || image.height != ref.height)
        throw Error(errc::domain, "image does not match reference frame size");
}

}  // namespace detail

// Mean absolute error over sample pixels, R/G/B pooled.
inline double sparse_mae(const SparseReference& ref, const ImageRGB& image) {
    detail::require_reference(ref, image);
    double acc = 0.0;
    for (const SparseSample& s : ref.samples) {
        const uint8_t* px = image.px(s.x, s.y);
        for (int c = 0; c < 3; ++c)
            acc += std::abs(static_cast<double>(px[c]) - static_cast<double>(s.rgb[c]));
    }
    return acc / (3.0 * static_cast<double>(ref.samples.size()));
}

inline double sparse_rmse(const SparseReference& ref, const ImageRGB& image) {
    detail::require_reference(ref, image);
    double acc = 0.0;
    for (const SparseSample& s : ref.samples) {
        const uint8_t* px = image.px(s.x, s.y);
        for (int c = 0; c < 3; ++c) {
            double d = static_cast<double>(px[c]) - static_cast<double>(s.rgb[c]);
            acc += d * d;
        }
    }
    return std::sqrt(acc / (3.0 * static_cast<double>(ref.samples.size())));
}

// 20 log10(255 / rmse), capped at 100 dB for near-zero error.
inline double psnr_from_rmse(double rmse) {
    if (rmse < 255.0 * 1e-5) return kPsnrCap;
    return std::min(kPsnrCap, 20.0 * std::log10(255.0 / rmse));
}

inline double sparse_psnr(const SparseReference& ref, const ImageRGB& image) {
    return psnr_from_rmse(sparse_rmse(ref, image));
}

// Structural similarity on luma over a sparse raster. Reference samples are
// splatted to a luma grid with a validity mask; each window position uses
// Gaussian weights renormalized over valid pixels and is skipped when fewer
// than min_coverage of its pixels are valid. Window centers are the positions
// where the full window fits inside the frame.
inline double sparse_ssim(const SparseReference& ref, const ImageRGB& image,
                          const SsimConfig& cfg = {}) {
    detail::require_reference(ref, image);
    const int w = ref.width, h = ref.height;
    const int win = cfg.window;
    const int rad = win / 2;
    if (w < win || h < win)
        throw Error(errc::no_reference, "insufficient coverage: frame smaller than window");

    std::vector<double> ref_luma(static_cast<size_t>(w) * h, 0.0);
    std::vector<uint8_t> valid(static_cast<size_t>(w) * h, 0);
    for (const SparseSample& s : ref.samples) {
        size_t idx = static_cast<size_t>(s.y) * w + s.x;
        ref_luma[idx] = luma601(s.rgb[0], s.rgb[1], s.rgb[2]);
        valid[idx] = 1;
    }
    ImageF img_luma = to_luma(image);

    std::vector<double> g(static_cast<size_t>(win) * win);
    for (int dy = -rad; dy <= rad; ++dy)
        for (int dx = -rad; dx <= rad; ++dx)
            g[static_cast<size_t>(dy + rad) * win + (dx + rad)] =
                std::exp(-0.5 * (dx * dx + dy * dy) / (cfg.sigma * cfg.sigma));

    const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
    const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
    const double min_count = cfg.min_coverage * win * win;

    double total = 0.0;
    long windows = 0;
    for (int y = rad; y < h - rad; ++y) {
        for (int x = rad; x < w - rad; ++x) {
            double wsum = 0.0;
            int count = 0;
            double mu1 = 0.0, mu2 = 0.0;
            for (int dy = -rad; dy <= rad; ++dy)
                for (int dx = -rad; dx <= rad; ++dx) {
                    size_t idx = static_cast<size_t>(y + dy) * w + (x + dx);
                    if (!valid[idx]) continue;
                    double gw = g[static_cast<size_t>(dy + rad) * win + (dx + rad)];
                    wsum += gw;
                    ++count;
                    mu1 += gw * ref_luma[idx];
                    mu2 += gw * img_luma.data[idx];
                }
            if (count < min_count || wsum <= 0.0) continue;
            mu1 /= wsum;
            mu2 /= wsum;
            double var1 = 0.0, var2 = 0.0, cov = 0.0;
            for (int dy = -rad; dy <= rad; ++dy)
                for (int dx = -rad; dx <= rad; ++dx) {
                    size_t idx = static_cast<size_t>(y + dy) * w + (x + dx);
                    if (!valid[idx]) continue;
                    double gw = g[static_cast<size_t>(dy + rad) * win + (dx + rad)] / wsum;
                    double d1 = ref_luma[idx] - mu1;
                    double d2 = img_luma.data[idx] - mu2;
                    var1 += gw * d1 * d1;
                    var2 += gw * d2 * d2;
                    cov += gw * d1 * d2;
                }
            total += ((2.0 * mu1 * mu2 + c1) * (2.0 * cov + c2)) /
                     ((mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2));
            ++windows;
        }
    }
    if (windows == 0) throw Error(errc::no_reference, "insufficient coverage");
    return total / static_cast<double>(windows);
}

inline SparseMetrics evaluate(const ImageRGB& image, const SparseReference& ref,
                              const SsimConfig& ssim_cfg = {}) {
    SparseMetrics m;
    m.mae = sparse_mae(ref, image);
    m.rmse = sparse_rmse(ref, image);
    m.psnr = psnr_from_rmse(m.rmse);
    m.ssim = sparse_ssim(ref, image, ssim_cfg);
    m.coverage = ref.coverage();
    return m;
}

}  // namespace viewstitch
