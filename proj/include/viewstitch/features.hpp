#pragma once

// Scale-space keypoint detection and 128-d orientation-histogram descriptors.
// Difference-of-smoothed-images pyramid, 3D quadratic extremum refinement,
// contrast and edge-response filtering, dominant-orientation assignment, and
// the classic 4x4x8 gradient descriptor. Everything is deterministic: no
// randomness, fixed traversal order, stable final sort.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "viewstitch/common.hpp"
#include "viewstitch/image.hpp"

namespace viewstitch {

struct FeatureConfig {
    int octaves = 4;
    int scales_per_octave = 3;       // extremum layers per octave
    double contrast_threshold = 0.03;  // on [0,1] intensities
    double edge_ratio = 10.0;          // principal-curvature ratio limit
    double sigma0 = 1.6;               // base blur of each octave
    double input_sigma = 0.5;          // assumed blur of the input image
    int border = 5;                    // extrema closer to the edge are dropped
    int max_keypoints = 0;             // keep the strongest N; 0 = all
};

struct Keypoint {
    Vec2 position;            // sub-pixel, input-image coordinates
    double scale = 1.0;       // blur sigma at detection, input-image units
    double orientation = 0.0; // radians
    double response = 0.0;    // |interpolated extremum value|
};

inline constexpr int kDescriptorLength = 128;

struct Descriptor {
    std::array<float, kDescriptorLength> v{};

    double distance(const Descriptor& o) const {
        double acc = 0.0;
        for (int i = 0; i < kDescriptorLength; ++i) {
            double d = static_cast<double>(v[i]) - static_cast<double>(o.v[i]);
            acc += d * d;
        }
        return std::sqrt(acc);
    }
};

namespace detail {

struct ScaleSpace {
    // gauss[o][s]: octave o, level s in [0, scales+2]
    std::vector<std::vector<ImageF>> gauss;
    // dog[o][s] = gauss[o][s+1] - gauss[o][s]
    std::vector<std::vector<ImageF>> dog;
};

inline ScaleSpace build_scale_space(const ImageF& base, const FeatureConfig& cfg) {
    ScaleSpace ss;
    const int levels = cfg.scales_per_octave + 3;
    const double k = std::pow(2.0, 1.0 / cfg.scales_per_octave);

    double boost = std::sqrt(std::max(cfg.sigma0 * cfg.sigma0 -
                                      cfg.input_sigma * cfg.input_sigma, 0.01));
    ImageF octave_base = gaussian_blur(base, boost);

    for (int o = 0; o < cfg.octaves; ++o) {
        if (octave_base.width < 8 || octave_base.height < 8) break;
        std::vector<ImageF> gs;
        gs.reserve(levels);
        gs.push_back(octave_base);
        double prev_sigma = cfg.sigma0;
        for (int s = 1; s < levels; ++s) {
            double total = cfg.sigma0 * std::pow(k, s);
            double inc = std::sqrt(total * total - prev_sigma * prev_sigma);
            gs.push_back(gaussian_blur(gs.back(), inc));
            prev_sigma = total;
        }
        std::vector<ImageF> ds;
        ds.reserve(levels - 1);
        for (int s = 0; s + 1 < levels; ++s) {
            ImageF d(gs[s].width, gs[s].height);
            for (size_t i = 0; i < d.data.size(); ++i)
                d.data[i] = gs[s + 1].data[i] - gs[s].data[i];
            ds.push_back(std::move(d));
        }
        // Level `scales` carries blur 2*sigma0: the seed for the next octave.
        octave_base = downsample_half(gs[cfg.scales_per_octave]);
        ss.gauss.push_back(std::move(gs));
        ss.dog.push_back(std::move(ds));
    }
    return ss;
}

struct RefinedExtremum {
    double x = 0, y = 0, layer = 0;
    double value = 0;
    bool ok = false;
};

inline RefinedExtremum refine_extremum(const std::vector<ImageF>& dog, int s, int x, int y,
                                       const FeatureConfig& cfg) {
    RefinedExtremum out;
    const int w = dog[s].width, h = dog[s].height;
    double dx = 0, dy = 0, ds = 0;
    for (int iter = 0; iter < 5; ++iter) {
        const ImageF& d0 = dog[s - 1];
        const ImageF& d1 = dog[s];
        const ImageF& d2 = dog[s + 1];
        double v = d1.at(x, y);

        double gx = 0.5 * (d1.at(x + 1, y) - d1.at(x - 1, y));
        double gy = 0.5 * (d1.at(x, y + 1) - d1.at(x, y - 1));
        double gs = 0.5 * (d2.at(x, y) - d0.at(x, y));

        double hxx = d1.at(x + 1, y) + d1.at(x - 1, y) - 2 * v;
        double hyy = d1.at(x, y + 1) + d1.at(x, y - 1) - 2 * v;
        double hss = d2.at(x, y) + d0.at(x, y) - 2 * v;
        double hxy = 0.25 * (d1.at(x + 1, y + 1) - d1.at(x - 1, y + 1) -
                             d1.at(x + 1, y - 1) + d1.at(x - 1, y - 1));
        double hxs = 0.25 * (d2.at(x + 1, y) - d2.at(x - 1, y) -
                             d0.at(x + 1, y) + d0.at(x - 1, y));
        double hys = 0.25 * (d2.at(x, y + 1) - d2.at(x, y - 1) -
                             d0.at(x, y + 1) + d0.at(x, y - 1));

        // Solve H * delta = -g via Cramer's rule on the 3x3 system.
        Mat3 hess;
        hess.m = {hxx, hxy, hxs, hxy, hyy, hys, hxs, hys, hss};
        double det = hess.det();
        if (std::abs(det) < 1e-20) return out;
        Mat3 hinv = hess.inverse();
        Vec3 delta = hinv * Vec3{-gx, -gy, -gs};
        dx = delta.x;
        dy = delta.y;
        ds = delta.z;

        if (std::abs(dx) < 0.5 && std::abs(dy) < 0.5 && std::abs(ds) < 0.5) {
            out.value = v + 0.5 * (gx * dx + gy * dy + gs * ds);
            out.x = x + dx;
            out.y = y + dy;
            out.layer = s + ds;
            out.ok = true;
            return out;
        }
        x += static_cast<int>(std::lround(dx));
        y += static_cast<int>(std::lround(dy));
        s += static_cast<int>(std::lround(ds));
        if (s < 1 || s > static_cast<int>(dog.size()) - 2 || x < cfg.border ||
            x >= w - cfg.border || y < cfg.border || y >= h - cfg.border)
            return out;
    }
    return out;
}

inline bool edge_like(const ImageF& d, int x, int y, double edge_ratio) {
    double v = d.at(x, y);
    double hxx = d.at(x + 1, y) + d.at(x - 1, y) - 2 * v;
    double hyy = d.at(x, y + 1) + d.at(x, y - 1) - 2 * v;
    double hxy = 0.25 * (d.at(x + 1, y + 1) - d.at(x - 1, y + 1) -
                         d.at(x + 1, y - 1) + d.at(x - 1, y - 1));
    double tr = hxx + hyy;
    double det = hxx * hyy - hxy * hxy;
    if (det <= 0.0) return true;
    double r = edge_ratio;
    return tr * tr * r >= (r + 1) * (r + 1) * det;
}

// Gradient-orientation histogram around (x, y) in one pyramid image; returns
// dominant directions (>= 80% of the peak), parabolically interpolated.
inline std::vector<double> dominant_orientations(const ImageF& img, double x, double y,
                                                 double sigma) {
    constexpr int kBins = 36;
    std::array<double, kBins> hist{};
    const double weight_sigma = 1.5 * sigma;
    const int radius = std::max(1, static_cast<int>(std::lround(3.0 * weight_sigma)));
    const int cx = static_cast<int>(std::lround(x));
    const int cy = static_cast<int>(std::lround(y));

    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            int px = cx + dx, py = cy + dy;
            if (px < 1 || px >= img.width - 1 || py < 1 || py >= img.height - 1) continue;
            double gx = 0.5 * (img.at(px + 1, py) - img.at(px - 1, py));
            double gy = 0.5 * (img.at(px, py + 1) - img.at(px, py - 1));
            double mag = std::sqrt(gx * gx + gy * gy);
            double angle = std::atan2(gy, gx);
            double w = std::exp(-0.5 * (dx * dx + dy * dy) / (weight_sigma * weight_sigma));
            int bin = static_cast<int>(std::floor((angle + kPi) / (2 * kPi) * kBins));
            bin = std::clamp(bin, 0, kBins - 1);
            hist[bin] += w * mag;
        }
    }

    // Circular smoothing.
    for (int pass = 0; pass < 2; ++pass) {
        std::array<double, kBins> sm{};
        for (int i = 0; i < kBins; ++i)
            sm[i] = (hist[(i + kBins - 1) % kBins] + hist[i] + hist[(i + 1) % kBins]) / 3.0;
        hist = sm;
    }

    double peak = *std::max_element(hist.begin(), hist.end());
    std::vector<double> out;
    if (peak <= 0.0) return out;
    for (int i = 0; i < kBins; ++i) {
        double l = hist[(i + kBins - 1) % kBins];
        double c = hist[i];
        double r = hist[(i + 1) % kBins];
        if (c >= 0.8 * peak && c > l && c > r) {
            double offset = 0.5 * (l - r) / (l - 2 * c + r);
            double angle = (i + 0.5 + offset) / kBins * 2 * kPi - kPi;
            out.push_back(angle);
        }
    }
    return out;
}

// 4x4 spatial bins x 8 orientation bins with trilinear interpolation,
// rotation-normalized, clipped at 0.2 and renormalized.
inline Descriptor compute_descriptor(const ImageF& img, double x, double y, double sigma,
                                     double orientation) {
    constexpr int kD = 4, kN = 8;
    const double cos_t = std::cos(-orientation);
    const double sin_t = std::sin(-orientation);
    const double hist_width = 3.0 * sigma;
    const int radius = std::min(
        static_cast<int>(std::lround(hist_width * std::sqrt(2.0) * (kD + 1) * 0.5)),
        static_cast<int>(std::hypot(img.width, img.height)));

    std::array<double, (kD + 2) * (kD + 2) * kN> raw{};
    auto raw_at = [&raw](int r, int c, int o) -> double& {
        return raw[(static_cast<size_t>(r) * (kD + 2) + c) * kN + o];
    };

    const int cx = static_cast<int>(std::lround(x));
    const int cy = static_cast<int>(std::lround(y));
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            int px = cx + dx, py = cy + dy;
            if (px < 1 || px >= img.width - 1 || py < 1 || py >= img.height - 1) continue;
            // Rotate the offset into the keypoint frame.
            double rx = (cos_t * dx - sin_t * dy) / hist_width;
            double ry = (sin_t * dx + cos_t * dy) / hist_width;
            double rbin = ry + kD / 2.0 - 0.5;
            double cbin = rx + kD / 2.0 - 0.5;
            if (rbin <= -1 || rbin >= kD || cbin <= -1 || cbin >= kD) continue;

            double gx = 0.5 * (img.at(px + 1, py) - img.at(px - 1, py));
            double gy = 0.5 * (img.at(px, py + 1) - img.at(px, py - 1));
            double mag = std::sqrt(gx * gx + gy * gy);
            double angle = std::atan2(gy, gx) - orientation;  // keypoint frame
            double obin = (angle + kPi) / (2 * kPi) * kN;
            double w = std::exp(-(rx * rx + ry * ry) / (0.5 * kD * kD));

            int r0 = static_cast<int>(std::floor(rbin));
            int c0 = static_cast<int>(std::floor(cbin));
            int o0 = static_cast<int>(std::floor(obin));
            double fr = rbin - r0, fc = cbin - c0, fo = obin - o0;
            o0 = ((o0 % kN) + kN) % kN;
            for (int ir = 0; ir < 2; ++ir)
                for (int ic = 0; ic < 2; ++ic)
                    for (int io = 0; io < 2; ++io) {
                        int rr = r0 + ir + 1, cc = c0 + ic + 1;
                        if (rr < 0 || rr >= kD + 2 || cc < 0 || cc >= kD + 2) continue;
                        double contrib = w * mag * (ir ? fr : 1 - fr) * (ic ? fc : 1 - fc) *
                                         (io ? fo : 1 - fo);
                        raw_at(rr, cc, (o0 + io) % kN) += contrib;
                    }
        }
    }

    Descriptor desc;
    int idx = 0;
    for (int r = 1; r <= kD; ++r)
        for (int c = 1; c <= kD; ++c)
            for (int o = 0; o < kN; ++o) desc.v[idx++] = static_cast<float>(raw_at(r, c, o));

    double norm = 0.0;
    for (float f : desc.v) norm += static_cast<double>(f) * f;
    norm = std::sqrt(norm);
    if (norm < 1e-12) return desc;  // degenerate patch: zero vector
    for (float& f : desc.v) f = static_cast<float>(std::min(f / norm, 0.2));
    norm = 0.0;
    for (float f : desc.v) norm += static_cast<double>(f) * f;
    norm = std::sqrt(norm);
    if (norm < 1e-12) return desc;
    for (float& f : desc.v) f = static_cast<float>(f / norm);
    return desc;
}

}  // namespace detail

struct FeatureSet {
    std::vector<Keypoint> keypoints;       // sorted by response, descending
    std::vector<Descriptor> descriptors;   // aligned with keypoints
};

inline FeatureSet detect_features(const ImageRGB& image, const FeatureConfig& cfg = {}) {
    if (std::min(image.width, image.height) < 32)
        throw Error(errc::domain, "detect_features: image smaller than 32 px");

    ImageF gray = to_luma_unit(image);
    detail::ScaleSpace ss = detail::build_scale_space(gray, cfg);

    const double k = std::pow(2.0, 1.0 / cfg.scales_per_octave);
    const double prefilter = 0.5 * cfg.contrast_threshold / cfg.scales_per_octave;

    FeatureSet out;
    for (size_t o = 0; o < ss.dog.size(); ++o) {
        const auto& dogs = ss.dog[o];
        const double octave_scale = static_cast<double>(1 << o);
        for (int s = 1; s + 1 < static_cast<int>(dogs.size()); ++s) {
            const ImageF& prev = dogs[s - 1];
            const ImageF& cur = dogs[s];
            const ImageF& next = dogs[s + 1];
            for (int y = cfg.border; y < cur.height - cfg.border; ++y) {
                for (int x = cfg.border; x < cur.width - cfg.border; ++x) {
                    float v = cur.at(x, y);
                    if (std::abs(v) <= prefilter) continue;
                    bool is_max = true, is_min = true;
                    for (int dy = -1; dy <= 1 && (is_max || is_min); ++dy)
                        for (int dx = -1; dx <= 1 && (is_max || is_min); ++dx) {
                            for (const ImageF* layer : {&prev, &cur, &next}) {
                                if (layer == &cur && dx == 0 && dy == 0) continue;
                                float nv = layer->at(x + dx, y + dy);
                                if (nv >= v) is_max = false;
                                if (nv <= v) is_min = false;
                            }
                        }
                    if (!is_max && !is_min) continue;

                    detail::RefinedExtremum ext = detail::refine_extremum(dogs, s, x, y, cfg);
                    if (!ext.ok) continue;
                    if (std::abs(ext.value) * cfg.scales_per_octave < cfg.contrast_threshold)
                        continue;
                    int layer_round = std::clamp(static_cast<int>(std::lround(ext.layer)), 1,
                                                 static_cast<int>(dogs.size()) - 2);
                    if (detail::edge_like(dogs[layer_round],
                                          static_cast<int>(std::lround(ext.x)),
                                          static_cast<int>(std::lround(ext.y)),
                                          cfg.edge_ratio))
                        continue;

                    double sigma_octave = cfg.sigma0 * std::pow(k, ext.layer);
                    const ImageF& gimg = ss.gauss[o][layer_round];
                    std::vector<double> orientations = detail::dominant_orientations(
                        gimg, ext.x, ext.y, cfg.sigma0 * std::pow(k, layer_round));
                    for (double angle : orientations) {
                        Keypoint kp;
                        kp.position = {ext.x * octave_scale, ext.y * octave_scale};
                        kp.scale = sigma_octave * octave_scale;
                        kp.orientation = angle;
                        kp.response = std::abs(ext.value);
                        out.keypoints.push_back(kp);
                        out.descriptors.push_back(detail::compute_descriptor(
                            gimg, ext.x, ext.y, sigma_octave, angle));
                    }
                }
            }
        }
    }

    // Strongest first; full tuple tiebreak keeps the order reproducible.
    std::vector<size_t> order(out.keypoints.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const Keypoint& ka = out.keypoints[a];
        const Keypoint& kb = out.keypoints[b];
        if (ka.response != kb.response) return ka.response > kb.response;
        if (ka.position.y != kb.position.y) return ka.position.y < kb.position.y;
        if (ka.position.x != kb.position.x) return ka.position.x < kb.position.x;
        return ka.scale < kb.scale;
    });
    FeatureSet sorted;
    size_t keep = order.size();
    if (cfg.max_keypoints > 0) keep = std::min(keep, static_cast<size_t>(cfg.max_keypoints));
    sorted.keypoints.reserve(keep);
    sorted.descriptors.reserve(keep);
    for (size_t i = 0; i < keep; ++i) {
        sorted.keypoints.push_back(out.keypoints[order[i]]);
        sorted.descriptors.push_back(out.descriptors[order[i]]);
    }
    return sorted;
}

}  // namespace viewstitch
