#pragma once

// Camera models, azimuth/elevation rotation parameterization, homography
// construction between views, and homography validity checks.
//
// Pose convention: CameraPose.rotation maps world coordinates to camera
// coordinates (x_cam = R * (x_world - center)). The camera looks down its
// local +z axis, x right, y toward the bottom of the image.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "viewstitch/common.hpp"

namespace viewstitch {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct Intrinsics {
    double f = 1.0;    // focal length, px
    double cx = 0.0;   // principal point, px
    double cy = 0.0;

    Intrinsics() = default;
    Intrinsics(double f_, double cx_, double cy_) : f(f_), cx(cx_), cy(cy_) {
        if (!(f > 0.0) || !std::isfinite(f) || !std::isfinite(cx) || !std::isfinite(cy))
            throw Error(errc::config, "intrinsics: f must be > 0 and finite");
    }
};

struct RotationAngles {
    double theta = 0.0;  // azimuth, radians
    double phi = 0.0;    // elevation, radians

    RotationAngles() = default;
    RotationAngles(double theta_, double phi_) : theta(theta_), phi(phi_) {
        if (!std::isfinite(theta) || !std::isfinite(phi))
            throw Error(errc::config, "rotation angles must be finite");
    }
};

struct CameraPose {
    Mat3 rotation = Mat3::identity();  // world-to-camera
    Vec3 translation;                  // x_cam = rotation * x_world + translation
};

struct PlaneParams {
    Vec3 normal{0, 0, 1};   // unit vector, camera-1 frame
    double distance = 1.0;  // meters, > 0

    PlaneParams() = default;
    PlaneParams(const Vec3& n, double d) : normal(n.normalized()), distance(d) {
        if (!(d > 0.0)) throw Error(errc::config, "plane distance must be > 0");
    }
};

enum class HomographyProvenance { geometric, feature, blended, aligned };

inline const char* to_string(HomographyProvenance p) {
    switch (p) {
        case HomographyProvenance::geometric: return "geometric";
        case HomographyProvenance::feature: return "feature";
        case HomographyProvenance::blended: return "blended";
        case HomographyProvenance::aligned: return "aligned";
    }
    return "unknown";
}

// 3x3 projective map. Stored normalized so m(2,2) = 1 whenever |m(2,2)| is
// meaningfully nonzero, which makes element-wise comparison and blending
// well defined.
struct Homography {
    Mat3 m = Mat3::identity();
    HomographyProvenance provenance = HomographyProvenance::geometric;

    Homography() = default;
    Homography(const Mat3& mat, HomographyProvenance p) : m(mat), provenance(p) { normalize(); }

    void normalize() {
        double h33 = m(2, 2);
        if (std::abs(h33) > 1e-12) {
            double inv = 1.0 / h33;
            for (double& v : m.m) v *= inv;
        }
    }

    static Homography identity() { return {}; }

    double det() const { return m.det(); }

    // Degenerate maps collapse the plane; they are never marked valid.
    bool degenerate(double eps = 1e-12) const {
        double scale = m.max_abs();
        if (scale <= 0.0) return true;
        return std::abs(m.det()) < eps * scale * scale * scale;
    }

    Homography inverse() const {
        if (degenerate()) throw Error(errc::domain, "homography is degenerate, cannot invert");
        return Homography(m.inverse(), provenance);
    }
};

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

// K = [[f,0,cx],[0,f,cy],[0,0,1]]
inline Mat3 intrinsics_matrix(const Intrinsics& k) {
    Mat3 out;
    out.m = {k.f, 0, k.cx, 0, k.f, k.cy, 0, 0, 1};
    return out;
}

inline Mat3 intrinsics_inverse(const Intrinsics& k) {
    Mat3 out;
    out.m = {1.0 / k.f, 0, -k.cx / k.f, 0, 1.0 / k.f, -k.cy / k.f, 0, 0, 1};
    return out;
}

// Rz(theta) * Rx(phi). Orthonormal with det = 1 for all finite angles.
inline Mat3 rotation_from_angles(const RotationAngles& a) {
    return rotation_z(a.theta) * rotation_x(a.phi);
}

// World-to-camera rotation of a camera headed at azimuth theta (about world
// +z, which points up) and elevation phi above the horizon. At theta = phi = 0
// the camera sits upright looking along world +y. The extra Rx(phi - pi/2)
// factor re-bases rotation_from_angles so that phi is measured from the
// horizon instead of the zenith.
inline Mat3 heading_rotation(const RotationAngles& a) {
    Mat3 cam_to_world = rotation_z(a.theta) * rotation_x(a.phi - kPi / 2.0);
    return cam_to_world.transposed();
}

// Pure-rotation homography between two views sharing a camera center:
// H = K2 * R2 * R1^-1 * K1^-1 with R world-to-camera. Under the far-field
// approximation the same map is used for views with a small baseline.
inline Homography geometric_homography(const Intrinsics& k1, const Mat3& r1,
                                       const Intrinsics& k2, const Mat3& r2) {
    Mat3 h = intrinsics_matrix(k2) * (r2 * r1.transposed()) * intrinsics_inverse(k1);
    return Homography(h, HomographyProvenance::geometric);
}

// Plane-induced homography H = K2 * (R - t n^T / d) * K1^-1 where [R|t] maps
// camera-1 coordinates to camera-2 coordinates and (n, d) describe the plane
// n^T x = d in the camera-1 frame. Reduces to the rotation-only form at t = 0
// and converges to it as d / |t| grows.
inline Homography planar_homography(const Intrinsics& k1, const Intrinsics& k2,
                                    const Mat3& r, const Vec3& t, const PlaneParams& plane) {
    if (!(plane.distance > 0.0)) throw Error(errc::config, "plane distance must be > 0");
    Mat3 outer;
    const Vec3& n = plane.normal;
    outer.m = {t.x * n.x, t.x * n.y, t.x * n.z,
               t.y * n.x, t.y * n.y, t.y * n.z,
               t.z * n.x, t.z * n.y, t.z * n.z};
    Mat3 h = intrinsics_matrix(k2) * (r - outer * (1.0 / plane.distance)) * intrinsics_inverse(k1);
    return Homography(h, HomographyProvenance::geometric);
}

// ---------------------------------------------------------------------------
// Application
// ---------------------------------------------------------------------------

// Non-throwing projective transfer; returns false when the point maps to
// infinity. Hot loops (warping, correspondence grids) use this form.
inline bool project_point(const Mat3& h, const Vec2& p, Vec2& out) {
    double w = h.m[6] * p.x + h.m[7] * p.y + h.m[8];
    if (std::abs(w) < 1e-12) return false;
    double inv = 1.0 / w;
    out.x = (h.m[0] * p.x + h.m[1] * p.y + h.m[2]) * inv;
    out.y = (h.m[3] * p.x + h.m[4] * p.y + h.m[5]) * inv;
    return true;
}

// pi(H * [p, 1]); throws when the denominator vanishes.
inline Vec2 apply_homography(const Homography& h, const Vec2& p) {
    Vec2 out;
    if (!project_point(h.m, p, out))
        throw Error(errc::domain, "apply_homography: point at infinity");
    return out;
}

// ---------------------------------------------------------------------------
// Validity
// ---------------------------------------------------------------------------

struct HomographyCheckConfig {
    double min_area_ratio = 0.1;
    double max_area_ratio = 10.0;
    double min_corner_denominator = 1e-8;
};

struct ValidityReport {
    std::array<Vec2, 4> warped_corners{};
    bool convex = false;
    double area_ratio = 0.0;  // signed; negative means the winding flipped
    bool valid = false;
    std::string reason;
};

inline double quad_signed_area(const std::array<Vec2, 4>& q) {
    double a = 0.0;
    for (int i = 0; i < 4; ++i) {
        const Vec2& p0 = q[i];
        const Vec2& p1 = q[(i + 1) % 4];
        a += p0.x * p1.y - p1.x * p0.y;
    }
    return 0.5 * a;
}

// Maps the four corners of a rectangular domain and rejects maps that send a
// corner to infinity, flip orientation, break convexity, or scale the domain
// area outside [min_area_ratio, max_area_ratio].
inline ValidityReport check_homography_domain(const Homography& h,
                                              const std::array<Vec2, 4>& corners,
                                              const HomographyCheckConfig& cfg = {}) {
    ValidityReport report;
    bool sign_positive = false, sign_negative = false;
    for (int i = 0; i < 4; ++i) {
        const Vec2& c = corners[i];
        double w = h.m.m[6] * c.x + h.m.m[7] * c.y + h.m.m[8];
        if (std::abs(w) <= cfg.min_corner_denominator) {
            report.reason = "corner at infinity";
            return report;
        }
        (w > 0 ? sign_positive : sign_negative) = true;
        report.warped_corners[i] = {(h.m.m[0] * c.x + h.m.m[1] * c.y + h.m.m[2]) / w,
                                    (h.m.m[3] * c.x + h.m.m[4] * c.y + h.m.m[5]) / w};
    }
    if (sign_positive && sign_negative) {
        report.reason = "quad crosses infinity";
        return report;
    }

    // Convexity with consistent winding: all consecutive edge cross products
    // share a sign.
    double first_cross = 0.0;
    report.convex = true;
    for (int i = 0; i < 4; ++i) {
        Vec2 e0 = report.warped_corners[(i + 1) % 4] - report.warped_corners[i];
        Vec2 e1 = report.warped_corners[(i + 2) % 4] - report.warped_corners[(i + 1) % 4];
        double cr = e0.cross(e1);
        if (i == 0)
            first_cross = cr;
        else if (cr * first_cross <= 0.0)
            report.convex = false;
    }

    double src_area = quad_signed_area(corners);
    report.area_ratio = quad_signed_area(report.warped_corners) / src_area;

    if (!report.convex) {
        report.reason = "warped quad not convex";
        return report;
    }
    if (report.area_ratio <= 0.0) {
        report.reason = "orientation flipped";
        return report;
    }
    if (report.area_ratio < cfg.min_area_ratio || report.area_ratio > cfg.max_area_ratio) {
        report.reason = "area ratio out of range";
        return report;
    }
    report.valid = true;
    return report;
}

// Rectangle of interest within a source frame; the domain the stage-2 checks
// run over when two frames only partially overlap.
struct RectDomain {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    std::array<Vec2, 4> corners() const {
        return {Vec2{x0, y0}, Vec2{x1, y0}, Vec2{x1, y1}, Vec2{x0, y1}};
    }
};

inline ValidityReport check_homography(const Homography& h, const RectDomain& domain,
                                       const HomographyCheckConfig& cfg = {}) {
    if (!(domain.width() > 0.0) || !(domain.height() > 0.0))
        throw Error(errc::config, "check_homography: domain must have positive size");
    return check_homography_domain(h, domain.corners(), cfg);
}

// Full-frame check over the four image corners.
inline ValidityReport check_homography(const Homography& h, double width, double height,
                                       const HomographyCheckConfig& cfg = {}) {
    if (!(width > 0.0) || !(height > 0.0))
        throw Error(errc::config, "check_homography: frame size must be positive");
    return check_homography_domain(
        h, {Vec2{0, 0}, Vec2{width, 0}, Vec2{width, height}, Vec2{0, height}}, cfg);
}

// ---------------------------------------------------------------------------
// Camera model
// ---------------------------------------------------------------------------

struct CameraModel {
    std::string name;
    Intrinsics intrinsics;
    RotationAngles angles;  // azimuth/elevation; see heading_rotation
    Vec3 center;            // camera center, world frame, meters
    int width = 0;
    int height = 0;
    bool primary = false;

    Mat3 rotation_world_to_camera() const { return heading_rotation(angles); }

    CameraPose pose() const {
        CameraPose p;
        p.rotation = rotation_world_to_camera();
        p.translation = (p.rotation * center) * -1.0;
        return p;
    }

    Vec3 optical_axis_world() const {
        // Third row of the world-to-camera rotation is the camera z axis.
        Mat3 r = rotation_world_to_camera();
        return {r(2, 0), r(2, 1), r(2, 2)};
    }

    // Direction of the ray through pixel (x, y), world frame, unit length.
    Vec3 pixel_ray_world(double x, double y) const {
        Vec3 d{(x - intrinsics.cx) / intrinsics.f, (y - intrinsics.cy) / intrinsics.f, 1.0};
        Mat3 cam_to_world = rotation_world_to_camera().transposed();
        return (cam_to_world * d).normalized();
    }

    // Projects a world point. Returns false when the point is behind the
    // camera (depth <= 0); `pixel` may then be left untouched.
    bool project(const Vec3& world, Vec2& pixel, double& depth) const {
        Mat3 r = rotation_world_to_camera();
        Vec3 c = r * (world - center);
        if (c.z <= 0.0) return false;
        depth = c.z;
        pixel.x = intrinsics.f * c.x / c.z + intrinsics.cx;
        pixel.y = intrinsics.f * c.y / c.z + intrinsics.cy;
        return true;
    }

    bool in_frame(const Vec2& p) const {
        return p.x >= 0.0 && p.x <= width - 1.0 && p.y >= 0.0 && p.y <= height - 1.0;
    }
};

// Far-field homography mapping pixels of `source` onto pixels of `target`,
// ignoring the baseline between their centers.
inline Homography camera_homography(const CameraModel& source, const CameraModel& target) {
    return geometric_homography(source.intrinsics, source.rotation_world_to_camera(),
                                target.intrinsics, target.rotation_world_to_camera());
}

}  // namespace viewstitch
