#pragma once

// Deterministic synthetic environments rendered through the pinhole rig.
// They provide what recorded data cannot: exact ground-truth images at any
// pose and point clouds with exact colors. Textures are band-limited
// (multi-octave value noise plus soft grid lines) so resampling error stays
// well below the tolerances used by the stitching checks, while leaving the
// feature detector plenty of structure at several scales.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "viewstitch/common.hpp"
#include "viewstitch/geometry.hpp"
#include "viewstitch/image.hpp"
#include "viewstitch/sparse_eval.hpp"

namespace viewstitch {

enum class EnvironmentKind { far_sphere, ground_plane, composite };

inline const char* to_string(EnvironmentKind k) {
    switch (k) {
        case EnvironmentKind::far_sphere: return "far_sphere";
        case EnvironmentKind::ground_plane: return "ground_plane";
        case EnvironmentKind::composite: return "composite";
    }
    return "unknown";
}

struct Environment {
    EnvironmentKind kind = EnvironmentKind::far_sphere;
    double sphere_radius = 5000.0;   // meters; keep >= 100x the rig baseline
    double plane_z = 0.0;            // ground plane height, world z
    uint64_t seed = 1;

    // Texture controls.
    double base_frequency = 8.0;     // lowest noise octave, cycles per unit
    int octaves = 4;
    double noise_gain = 0.6;         // per-octave amplitude falloff
    double grid_spacing_deg = 10.0;  // sphere grid line spacing
    double plane_grid_spacing = 1.0; // meters
    double line_width = 0.004;      // radians on the sphere, meters on the plane
    double line_strength = 0.45;
    // Soft elliptical spots (Worley-style cells), the blob structure the
    // keypoint detector keys on. Angular radii in radians.
    int spot_layers = 2;
    double spot_cell = 0.08;         // lattice cell size of the coarsest layer
    double spot_strength = 0.55;

    static Environment far_sphere(uint64_t seed, double radius = 5000.0) {
        Environment env;
        env.kind = EnvironmentKind::far_sphere;
        env.sphere_radius = radius;
        env.seed = seed;
        return env;
    }

    static Environment ground_plane(uint64_t seed, double z = 0.0) {
        Environment env;
        env.kind = EnvironmentKind::ground_plane;
        env.plane_z = z;
        env.seed = seed;
        env.line_width = 0.05;
        return env;
    }

    static Environment composite(uint64_t seed, double radius = 5000.0, double z = 0.0) {
        Environment env = far_sphere(seed, radius);
        env.kind = EnvironmentKind::composite;
        env.plane_z = z;
        return env;
    }
};

namespace detail {

// Hash of a lattice point to three channel values in [0, 1).
inline Vec3 lattice_rgb(int64_t x, int64_t y, int64_t z, uint64_t seed) {
    uint64_t h = splitmix64(static_cast<uint64_t>(x) * 0x9e3779b97f4a7c15ULL ^
                            splitmix64(static_cast<uint64_t>(y) ^
                                       splitmix64(static_cast<uint64_t>(z) ^ seed)));
    auto unit = [](uint64_t bits) { return static_cast<double>(bits & 0x1fffff) / 2097152.0; };
    return {unit(h), unit(h >> 21), unit(h >> 42)};
}

inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Trilinear value noise, C1-smooth, per-channel.
inline Vec3 value_noise3(const Vec3& p, uint64_t seed) {
    double fx = std::floor(p.x), fy = std::floor(p.y), fz = std::floor(p.z);
    int64_t ix = static_cast<int64_t>(fx), iy = static_cast<int64_t>(fy),
            iz = static_cast<int64_t>(fz);
    double tx = smoothstep(p.x - fx), ty = smoothstep(p.y - fy), tz = smoothstep(p.z - fz);

    Vec3 c[2][2][2];
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
                c[dz][dy][dx] = lattice_rgb(ix + dx, iy + dy, iz + dz, seed);

    auto lerp = [](const Vec3& a, const Vec3& b, double t) { return a + (b - a) * t; };
    Vec3 x00 = lerp(c[0][0][0], c[0][0][1], tx);
    Vec3 x10 = lerp(c[0][1][0], c[0][1][1], tx);
    Vec3 x01 = lerp(c[1][0][0], c[1][0][1], tx);
    Vec3 x11 = lerp(c[1][1][0], c[1][1][1], tx);
    Vec3 y0 = lerp(x00, x10, ty);
    Vec3 y1 = lerp(x01, x11, ty);
    return lerp(y0, y1, tz);
}

inline Vec3 fractal_noise3(const Vec3& p, uint64_t seed, double base_freq, int octaves,
                           double gain) {
    Vec3 acc;
    double amp = 1.0, total = 0.0, freq = base_freq;
    for (int o = 0; o < octaves; ++o) {
        Vec3 n = value_noise3(p * freq, seed + static_cast<uint64_t>(o) * 0x51ed2701ULL);
        acc = acc + n * amp;
        total += amp;
        amp *= gain;
        freq *= 2.0;
    }
    return acc / total;
}

// Soft dark/light discs centered on jittered lattice cells. Each cell of each
// layer hosts one spot with hashed radius, contrast, and sign; only the 27
// neighbouring cells can contribute, so evaluation is O(1) per sample.
inline double spot_field(const Vec3& p, uint64_t seed, double cell, int layers) {
    double total = 0.0;
    double layer_cell = cell;
    for (int l = 0; l < layers; ++l) {
        Vec3 scaled = p / layer_cell;
        int64_t bx = static_cast<int64_t>(std::floor(scaled.x));
        int64_t by = static_cast<int64_t>(std::floor(scaled.y));
        int64_t bz = static_cast<int64_t>(std::floor(scaled.z));
        for (int64_t dz = -1; dz <= 1; ++dz)
            for (int64_t dy = -1; dy <= 1; ++dy)
                for (int64_t dx = -1; dx <= 1; ++dx) {
                    Vec3 r = lattice_rgb(bx + dx, by + dy, bz + dz,
                                         seed ^ (0x9d5f3c2bULL + l));
                    // Spot center jittered inside the cell; radius 15-35% of
                    // the cell; signed contrast from the third channel.
                    Vec3 center{(bx + dx + r.x) * layer_cell, (by + dy + r.y) * layer_cell,
                                (bz + dz + 0.5) * layer_cell};
                    double radius = layer_cell * (0.2 + 0.2 * r.y);
                    Vec3 d = p - center;
                    double dist2 = d.dot(d) / (radius * radius);
                    if (dist2 >= 1.0) continue;
                    double profile = (1.0 - dist2) * (1.0 - dist2);
                    double sign = r.z < 0.5 ? -1.0 : 1.0;
                    total += sign * profile;
                }
        layer_cell *= 0.5;
    }
    return total;
}

// Soft periodic line profile: 1 on a line, falling off over `width`.
inline double line_profile(double coord, double spacing, double width) {
    double f = coord / spacing;
    double d = std::abs(f - std::round(f)) * spacing;
    double t = d / width;
    return std::exp(-t * t);
}

// Color of the far sphere along unit direction `dir` (from the world origin).
inline Vec3 sphere_color(const Environment& env, const Vec3& dir) {
    Vec3 noise = fractal_noise3(dir, env.seed, env.base_frequency, env.octaves,
                                env.noise_gain);
    double lon = std::atan2(dir.y, dir.x);
    double lat = std::asin(std::clamp(dir.z, -1.0, 1.0));
    double spacing = deg2rad(env.grid_spacing_deg);
    double line = std::max(line_profile(lon * std::cos(lat), spacing, env.line_width),
                           line_profile(lat, spacing, env.line_width));
    double dark = 1.0 - env.line_strength * line;
    double spots = spot_field(dir, env.seed, env.spot_cell, env.spot_layers);
    Vec3 rgb = Vec3{30.0, 30.0, 30.0} + (noise * 195.0) * dark;
    double lift = spots * env.spot_strength * 80.0;
    return {rgb.x + lift, rgb.y + lift, rgb.z + lift};
}

inline Vec3 plane_color(const Environment& env, double x, double y) {
    Vec3 noise = fractal_noise3({x * 0.35, y * 0.35, 0.0}, env.seed ^ 0xabcdef12ULL,
                                env.base_frequency, env.octaves, env.noise_gain);
    double line = std::max(line_profile(x, env.plane_grid_spacing, env.line_width),
                           line_profile(y, env.plane_grid_spacing, env.line_width));
    double dark = 1.0 - env.line_strength * line;
    double spots = spot_field({x * 0.35, y * 0.35, 0.0}, env.seed ^ 0xabcdef12ULL,
                              env.spot_cell * 12.0, env.spot_layers);
    Vec3 rgb = Vec3{30.0, 30.0, 30.0} + (noise * 195.0) * dark;
    double lift = spots * env.spot_strength * 80.0;
    return {rgb.x + lift, rgb.y + lift, rgb.z + lift};
}

inline const Vec3 kSkyColor{70.0, 90.0, 120.0};

// Returns the surface color seen along a ray; `hit` reports whether a surface
// (rather than sky) was struck, with the world-space hit point.
inline Vec3 trace_ray(const Environment& env, const Vec3& origin, const Vec3& dir,
                      bool& hit, Vec3& point) {
    hit = false;
    bool want_plane = env.kind == EnvironmentKind::ground_plane ||
                      env.kind == EnvironmentKind::composite;
    if (want_plane && dir.z < -1e-12) {
        double t = (env.plane_z - origin.z) / dir.z;
        if (t > 0.0) {
            point = origin + dir * t;
            hit = true;
            return plane_color(env, point.x, point.y);
        }
    }
    if (env.kind != EnvironmentKind::ground_plane) {
        // |origin| << radius, so the positive root always exists.
        double b = origin.dot(dir);
        double c = origin.dot(origin) - env.sphere_radius * env.sphere_radius;
        double disc = b * b - c;
        if (disc > 0.0) {
            double t = -b + std::sqrt(disc);
            if (t > 0.0) {
                point = origin + dir * t;
                hit = true;
                return sphere_color(env, point.normalized());
            }
        }
    }
    return kSkyColor;
}

}  // namespace detail

// Exact environment color at a world point (used for ground-truth clouds).
inline Vec3 environment_color_at(const Environment& env, const Vec3& point) {
    if (env.kind != EnvironmentKind::far_sphere &&
        std::abs(point.z - env.plane_z) < 1e-9)
        return detail::plane_color(env, point.x, point.y);
    return detail::sphere_color(env, point.normalized());
}

// Per-pixel ray cast through the pinhole model. Deterministic for a fixed
// (environment seed, camera): two calls produce bit-identical images.
inline ImageRGB render_view(const Environment& env, const CameraModel& cam,
                            int width, int height) {
    if (width <= 0 || height <= 0)
        throw Error(errc::config, "render_view: bad frame size");
    ImageRGB out(width, height);
    Mat3 cam_to_world = cam.rotation_world_to_camera().transposed();
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            Vec3 d{(x - cam.intrinsics.cx) / cam.intrinsics.f,
                   (y - cam.intrinsics.cy) / cam.intrinsics.f, 1.0};
            Vec3 dir = (cam_to_world * d).normalized();
            bool hit = false;
            Vec3 p;
            Vec3 rgb = detail::trace_ray(env, cam.center, dir, hit, p);
            uint8_t* px = out.px(x, y);
            px[0] = clamp_u8(rgb.x);
            px[1] = clamp_u8(rgb.y);
            px[2] = clamp_u8(rgb.z);
        }
    }
    return out;
}

// n surface points with exact texture colors, usable as ground truth for the
// sparse evaluator. Sphere environments draw uniform directions; plane
// environments draw from a disc of the given radius around the origin.
inline ColoredPointCloud sample_environment_points(const Environment& env, int n,
                                                   uint64_t seed, double disc_radius = 40.0) {
    if (n < 1) throw Error(errc::config, "sample_environment_points: n must be >= 1");
    SeededRng rng(mix_seed(seed, 0x5eedu));
    ColoredPointCloud cloud;
    cloud.points.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        ColoredPoint pt;
        if (env.kind == EnvironmentKind::ground_plane) {
            double r = disc_radius * std::sqrt(rng.uniform());
            double a = rng.uniform(0.0, 2.0 * kPi);
            pt.position = {r * std::cos(a), r * std::sin(a), env.plane_z};
            Vec3 rgb = detail::plane_color(env, pt.position.x, pt.position.y);
            pt.rgb = {clamp_u8(rgb.x), clamp_u8(rgb.y), clamp_u8(rgb.z)};
        } else {
            Vec3 dir{rng.gaussian(), rng.gaussian(), rng.gaussian()};
            dir = dir.normalized();
            if (dir.norm() == 0.0) dir = {1, 0, 0};
            pt.position = dir * env.sphere_radius;
            Vec3 rgb = detail::sphere_color(env, dir);
            pt.rgb = {clamp_u8(rgb.x), clamp_u8(rgb.y), clamp_u8(rgb.z)};
        }
        cloud.points.push_back(std::move(pt));
    }
    return cloud;
}

// ---------------------------------------------------------------------------
// Default six-camera rig
// ---------------------------------------------------------------------------

// Surround layout: yaws {0, +/-55, +/-125, 180} degrees, shared intrinsics,
// sub-meter centers so far-field stitching holds by construction. The default
// focal gives a ~78 degree horizontal field, leaving ~23 degrees of overlap
// between neighbouring views for the feature stages to work with.
inline std::vector<CameraModel> default_rig(int width = 640, int height = 480,
                                            double focal = 0.0) {
    if (focal <= 0.0) focal = 0.62 * width;
    const double yaws[6] = {0, 55, -55, 125, -125, 180};
    const char* names[6] = {"front", "front_left", "front_right",
                            "back_left", "back_right", "back"};
    std::vector<CameraModel> rig(6);
    for (int i = 0; i < 6; ++i) {
        CameraModel& cam = rig[i];
        cam.name = names[i];
        cam.intrinsics = Intrinsics(focal, width / 2.0, height / 2.0);
        cam.angles = {deg2rad(yaws[i]), 0.0};
        double a = deg2rad(yaws[i]);
        // Push each camera slightly outward along its heading.
        Vec3 axis{-std::sin(a), std::cos(a), 0.0};
        cam.center = axis * 0.4;
        cam.center.z = 1.2;
        cam.width = width;
        cam.height = height;
        cam.primary = (i == 0);
    }
    return rig;
}

// Largest camera-center separation; the far-field sphere radius must exceed
// 100x this before the rotation-only approximation is trustworthy.
inline double rig_baseline(const std::vector<CameraModel>& rig) {
    double so_far = 0.0;
    for (size_t i = 0; i < rig.size(); ++i)
        for (size_t j = i + 1; j < rig.size(); ++j)
            so_far = std::max(so_far, (rig[i].center - rig[j].center).norm());
    return so_far;
}

inline void require_far_field(const Environment& env, const std::vector<CameraModel>& rig) {
    if (env.kind == EnvironmentKind::ground_plane) return;
    double baseline = rig_baseline(rig);
    if (env.sphere_radius < 100.0 * baseline)
        throw Error(errc::config,
                    "far_sphere radius must be at least 100x the rig baseline");
}

}  // namespace viewstitch
