#include <catch2/catch_amalgamated.hpp>

#include "viewstitch/geometry.hpp"

#include "oracles.hpp"

using namespace viewstitch;

namespace {

double mat_diff(const Mat3& a, const Mat3& b) {
    double d = 0.0;
    for (int i = 0; i < 9; ++i) d = std::max(d, std::abs(a.m[i] - b.m[i]));
    return d;
}

double orthonormality_error(const Mat3& r) {
    Mat3 g = r.transposed() * r;
    return mat_diff(g, Mat3::identity());
}

}  // namespace

TEST_CASE("intrinsics matrix placement", "[geometry]") {
    CHECK(mat_diff(intrinsics_matrix(Intrinsics(1, 0, 0)), Mat3::identity()) == 0.0);

    Mat3 k = intrinsics_matrix(Intrinsics(500, 320, 240));
    Mat3 expected;
    expected.m = {500, 0, 320, 0, 500, 240, 0, 0, 1};
    CHECK(mat_diff(k, expected) == 0.0);

    // K^-1 applied to the principal point gives the forward ray.
    Vec3 ray = intrinsics_inverse(Intrinsics(500, 320, 240)) * Vec3{320, 240, 1};
    CHECK(ray.x == Catch::Approx(0.0).margin(1e-15));
    CHECK(ray.y == Catch::Approx(0.0).margin(1e-15));
    CHECK(ray.z == Catch::Approx(1.0));

    CHECK_THROWS_AS(Intrinsics(0, 0, 0), Error);
    CHECK_THROWS_AS(Intrinsics(-5, 0, 0), Error);
}

TEST_CASE("rotation from azimuth/elevation angles", "[geometry]") {
    CHECK(mat_diff(rotation_from_angles({0, 0}), Mat3::identity()) < 1e-15);

    // Rz(90 deg) sends the x axis to the y axis.
    Vec3 v = rotation_from_angles({kPi / 2, 0}) * Vec3{1, 0, 0};
    CHECK(v.x == Catch::Approx(0.0).margin(1e-12));
    CHECK(v.y == Catch::Approx(1.0));
    CHECK(v.z == Catch::Approx(0.0).margin(1e-12));

    // Independent product oracle for (pi/4, pi/6).
    oracle::M3 want = oracle::m3_mul(oracle::m3_rz(kPi / 4), oracle::m3_rx(kPi / 6));
    Mat3 got = rotation_from_angles({kPi / 4, kPi / 6});
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) CHECK(got(r, c) == Catch::Approx(want[r][c]).margin(1e-15));
}

TEST_CASE("rotation matrices are orthonormal with det 1", "[geometry][property]") {
    SeededRng rng(1234);
    for (int i = 0; i < 200; ++i) {
        RotationAngles a{rng.uniform(-kPi, kPi), rng.uniform(-kPi, kPi)};
        Mat3 r = rotation_from_angles(a);
        CHECK(orthonormality_error(r) < 1e-9);
        CHECK(std::abs(r.det() - 1.0) < 1e-9);
        Mat3 hr = heading_rotation(a);
        CHECK(orthonormality_error(hr) < 1e-9);
        CHECK(std::abs(hr.det() - 1.0) < 1e-9);
    }
}

TEST_CASE("geometric homography basics", "[geometry]") {
    Intrinsics unit(1, 0, 0);
    Mat3 r = rotation_from_angles({0.3, -0.2});

    SECTION("same pose maps to identity") {
        Homography h = geometric_homography(unit, r, unit, r);
        CHECK(mat_diff(h.m, Mat3::identity()) < 1e-12);
        CHECK(h.provenance == HomographyProvenance::geometric);
    }

    SECTION("unit intrinsics collapse to the rotation") {
        Mat3 rz = rotation_z(0.4);
        Homography h = geometric_homography(unit, Mat3::identity(), unit, rz);
        // Equal up to the h33 normalization.
        Mat3 expected = rz * (1.0 / rz(2, 2));
        CHECK(mat_diff(h.m, expected) < 1e-12);
    }

    SECTION("normalized so h33 = 1") {
        Intrinsics k(500, 320, 240);
        Homography h = geometric_homography(k, rotation_from_angles({0.1, 0.0}), k,
                                            rotation_from_angles({-0.2, 0.05}));
        CHECK(h.m(2, 2) == 1.0);
    }
}

TEST_CASE("forward/backward homographies compose to identity", "[geometry][property]") {
    SeededRng rng(77);
    Intrinsics k(500, 320, 240);
    for (int i = 0; i < 50; ++i) {
        Mat3 r1 = rotation_from_angles({rng.uniform(-1, 1), rng.uniform(-1, 1)});
        Mat3 r2 = rotation_from_angles({rng.uniform(-1, 1), rng.uniform(-1, 1)});
        Homography fwd = geometric_homography(k, r1, k, r2);
        Homography bwd = geometric_homography(k, r2, k, r1);
        Homography composed(fwd.m * bwd.m, HomographyProvenance::geometric);
        CHECK(mat_diff(composed.m, Mat3::identity()) < 1e-9);
    }
}

TEST_CASE("planar homography", "[geometry]") {
    Intrinsics k(400, 200, 150);
    Mat3 r = rotation_from_angles({0.2, 0.1});
    PlaneParams ground({0, 0, 1}, 2.0);

    SECTION("zero translation reduces to the rotation-only form") {
        Homography planar = planar_homography(k, k, r, {0, 0, 0}, ground);
        Homography geom = geometric_homography(k, Mat3::identity(), k, r);
        CHECK(mat_diff(planar.m, geom.m) < 1e-12);
    }

    SECTION("far-field limit") {
        PlaneParams far_plane({0, 0, 1}, 1e9);
        Homography planar = planar_homography(k, k, r, {1, 0, 0}, far_plane);
        Homography geom = geometric_homography(k, Mat3::identity(), k, r);
        CHECK(mat_diff(planar.m, geom.m) < 1e-6);
    }

    SECTION("degenerate map is reported invalid") {
        // R - t n^T / d = diag(1, 1, 0): collapses depth, det = 0.
        PlaneParams p({0, 0, 1}, 2.0);
        Homography h = planar_homography(k, k, Mat3::identity(), {0, 0, 2.0}, p);
        CHECK(h.degenerate());
        CHECK_FALSE(check_homography(h, 640, 480).valid);
    }
}

TEST_CASE("planar converges to geometric as d grows", "[geometry][property]") {
    // Unit-scale intrinsics: K amplifies the t*n^T/d perturbation by roughly
    // f, so the 1e-6 element-wise bound at d/|t| = 1e9 is a statement about
    // the normalized matrices.
    Intrinsics k(1, 0, 0);
    SeededRng rng(99);
    for (int i = 0; i < 20; ++i) {
        Mat3 r = rotation_from_angles({rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)});
        Vec3 t{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        t = t.normalized();  // |t| = 1, d/|t| = 1e9
        Vec3 n = Vec3{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 1)}.normalized();
        Homography planar = planar_homography(k, k, r, t, PlaneParams(n, 1e9));
        Homography geom = geometric_homography(k, Mat3::identity(), k, r);
        CHECK(mat_diff(planar.m, geom.m) < 1e-6);
    }
}

TEST_CASE("apply homography", "[geometry]") {
    SECTION("identity") {
        Vec2 p = apply_homography(Homography::identity(), {10, 20});
        CHECK(p.x == 10.0);
        CHECK(p.y == 20.0);
    }

    SECTION("pure translation") {
        Mat3 t = Mat3::identity();
        t(0, 2) = 5;
        t(1, 2) = -2;
        Vec2 p = apply_homography(Homography(t, HomographyProvenance::geometric), {0, 0});
        CHECK(p.x == 5.0);
        CHECK(p.y == -2.0);
    }

    SECTION("projective scale invariance") {
        Mat3 s;
        s.m = {2, 0, 0, 0, 2, 0, 0, 0, 2};
        Vec2 p = apply_homography(Homography(s, HomographyProvenance::geometric), {7, 9});
        CHECK(p.x == Catch::Approx(7.0));
        CHECK(p.y == Catch::Approx(9.0));
    }

    SECTION("point at infinity throws") {
        Mat3 h = Mat3::identity();
        h(2, 0) = 1;
        h(2, 2) = 0;  // denominator vanishes at x = 0
        Homography hom;
        hom.m = h;  // skip normalization on purpose
        CHECK_THROWS_AS(apply_homography(hom, Vec2{0, 5}), Error);
    }
}

TEST_CASE("apply is invariant to matrix rescaling", "[geometry][property]") {
    SeededRng rng(31);
    for (int i = 0; i < 50; ++i) {
        Mat3 m;
        for (double& v : m.m) v = rng.uniform(-1, 1);
        m(2, 2) = 2.0;  // keep denominators healthy
        Homography h;
        h.m = m;
        Homography scaled;
        scaled.m = m * rng.uniform(0.1, 10.0);
        Vec2 p{rng.uniform(0, 100), rng.uniform(0, 100)};
        Vec2 a, b;
        if (project_point(h.m, p, a) && project_point(scaled.m, p, b)) {
            CHECK(a.x == Catch::Approx(b.x).margin(1e-9));
            CHECK(a.y == Catch::Approx(b.y).margin(1e-9));
        }
    }
}

TEST_CASE("homography validity checks", "[geometry]") {
    SECTION("identity is valid with unit area ratio") {
        ValidityReport r = check_homography(Homography::identity(), 640, 480);
        CHECK(r.valid);
        CHECK(r.convex);
        CHECK(r.area_ratio == Catch::Approx(1.0));
    }

    SECTION("strong projective row collapses the quad") {
        Mat3 m = Mat3::identity();
        m(2, 0) = 0.1;
        m(2, 1) = 0.1;
        Homography h;
        h.m = m;
        ValidityReport r = check_homography(h, 640, 480);
        CHECK_FALSE(r.valid);
    }

    SECTION("reflection flips orientation") {
        Mat3 m = Mat3::identity();
        m(0, 0) = -1;
        ValidityReport r = check_homography(Homography(m, HomographyProvenance::geometric),
                                            640, 480);
        CHECK_FALSE(r.valid);
        CHECK(r.area_ratio < 0.0);
    }

    SECTION("corner at infinity is reported") {
        Mat3 m = Mat3::identity();
        m(2, 0) = -1.0 / 640.0;  // denominator hits zero at the right corners
        Homography h;
        h.m = m;
        ValidityReport r = check_homography(h, 640, 480);
        CHECK_FALSE(r.valid);
        CHECK(r.reason == "corner at infinity");
    }

    SECTION("bad frame size throws") {
        CHECK_THROWS_AS(check_homography(Homography::identity(), 0, 480), Error);
    }
}

TEST_CASE("heading rotation gives azimuth-dependent axes", "[geometry]") {
    // Cameras at distinct azimuths must look in distinct directions; this is
    // what makes a surround rig a rig.
    CameraModel a;
    a.intrinsics = Intrinsics(100, 50, 50);
    a.angles = {0.0, 0.0};
    a.width = a.height = 100;
    CameraModel b = a;
    b.angles = {deg2rad(90), 0.0};

    Vec3 axis_a = a.optical_axis_world();
    Vec3 axis_b = b.optical_axis_world();
    CHECK(axis_a.dot(axis_b) == Catch::Approx(0.0).margin(1e-12));
    // Elevation zero means a horizontal axis.
    CHECK(axis_a.z == Catch::Approx(0.0).margin(1e-12));

    // Pixel rays through the principal point coincide with the axis.
    Vec3 ray = a.pixel_ray_world(50, 50);
    CHECK(ray.x == Catch::Approx(axis_a.x).margin(1e-12));
    CHECK(ray.y == Catch::Approx(axis_a.y).margin(1e-12));
    CHECK(ray.z == Catch::Approx(axis_a.z).margin(1e-12));
}

TEST_CASE("camera projection round trip", "[geometry]") {
    CameraModel cam;
    cam.intrinsics = Intrinsics(500, 320, 240);
    cam.angles = {deg2rad(30), deg2rad(-5)};
    cam.center = {0.2, -0.1, 1.5};
    cam.width = 640;
    cam.height = 480;

    SeededRng rng(7);
    for (int i = 0; i < 100; ++i) {
        Vec2 px{rng.uniform(0, 639), rng.uniform(0, 479)};
        double depth = rng.uniform(2.0, 50.0);
        Vec3 world = cam.center + cam.pixel_ray_world(px.x, px.y) * depth;
        Vec2 back;
        double z = 0.0;
        REQUIRE(cam.project(world, back, z));
        CHECK(back.x == Catch::Approx(px.x).margin(1e-6));
        CHECK(back.y == Catch::Approx(px.y).margin(1e-6));
    }
}
