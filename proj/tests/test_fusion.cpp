#include <catch2/catch_amalgamated.hpp>

#include "viewstitch/fusion.hpp"
#include "viewstitch/synth_scene.hpp"

#include "oracles.hpp"

using namespace viewstitch;

namespace {

ImageRGB noisy_image(int w, int h, uint64_t seed) {
    ImageRGB img(w, h);
    SeededRng rng(seed);
    for (uint8_t& v : img.data) v = static_cast<uint8_t>(rng.bounded(256));
    return img;
}

WarpedView full_view(const ImageRGB& img, double quality = 1.0, bool primary = false) {
    WarpedView v;
    v.image = img;
    v.coverage = MaskU8(img.width, img.height, 1);
    v.quality = quality;
    v.is_primary = primary;
    return v;
}

}  // namespace

TEST_CASE("warp with the identity is bit-exact", "[fusion]") {
    ImageRGB img = noisy_image(64, 48, 1);
    WarpedView out = warp_perspective(img, Homography::identity(), 64, 48);
    CHECK(out.image == img);
    CHECK(out.coverage.count_nonzero() == 64u * 48u);
}

TEST_CASE("warp by a pure translation shifts content", "[fusion]") {
    ImageRGB img = noisy_image(64, 48, 2);
    Mat3 t = Mat3::identity();
    t(0, 2) = 10.0;  // maps source x to target x + 10
    WarpedView out = warp_perspective(img, Homography(t, HomographyProvenance::geometric), 64, 48);
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 64; ++x) {
            if (x >= 10) {
                REQUIRE(out.coverage.at(x, y) == 1);
                for (int c = 0; c < 3; ++c) CHECK(out.image.px(x, y)[c] == img.px(x - 10, y)[c]);
            } else {
                CHECK(out.coverage.at(x, y) == 0);
            }
        }
}

TEST_CASE("warp rejects invalid homographies", "[fusion]") {
    ImageRGB img = noisy_image(64, 48, 3);
    Mat3 reflect = Mat3::identity();
    reflect(0, 0) = -1;
    CHECK_THROWS_AS(warp_perspective(img, Homography(reflect, HomographyProvenance::geometric),
                                     64, 48),
                    Error);
}

TEST_CASE("rotation-only warp matches the direct render", "[fusion][oracle]") {
    Environment env = Environment::far_sphere(17);
    CameraModel cam1;
    cam1.intrinsics = Intrinsics(300, 160, 120);
    cam1.angles = {0.0, 0.0};
    cam1.width = 320;
    cam1.height = 240;
    CameraModel cam2 = cam1;
    cam2.angles = {deg2rad(12), deg2rad(-3)};

    ImageRGB r1 = render_view(env, cam1, 320, 240);
    ImageRGB r2 = render_view(env, cam2, 320, 240);
    WarpedView warped = warp_perspective(r1, camera_homography(cam1, cam2), 320, 240);

    double acc = 0.0;
    long n = 0;
    for (int y = 2; y < 238; ++y)
        for (int x = 2; x < 318; ++x) {
            if (!warped.coverage.at(x, y)) continue;
            for (int c = 0; c < 3; ++c) {
                double d = static_cast<double>(warped.image.px(x, y)[c]) - r2.px(x, y)[c];
                acc += d * d;
                ++n;
            }
        }
    REQUIRE(n > 10000);
    double rms = std::sqrt(acc / static_cast<double>(n));
    INFO("rms " << rms);
    CHECK(rms < 2.0);
}

TEST_CASE("distance weight formula", "[fusion]") {
    SECTION("full square frame: center weight is 1") {
        MaskU8 mask(21, 21, 1);
        WeightMap w = distance_weight(mask, 2.0);
        CHECK(w.at(10, 10) == Catch::Approx(1.0));
        CHECK(w.at(0, 0) < w.at(10, 10));
    }

    SECTION("d=1 against d_max=10 at gamma 2 gives 0.01") {
        MaskU8 mask(19, 19, 1);  // center distance = 10, border pixels = 1
        WeightMap w = distance_weight(mask, 2.0);
        CHECK(w.at(9, 9) == Catch::Approx(1.0));
        CHECK(w.at(0, 9) == Catch::Approx(0.01));
    }

    SECTION("empty mask gives all zeros") {
        MaskU8 mask(8, 8, 0);
        WeightMap w = distance_weight(mask, 2.0);
        for (double v : w.values) CHECK(v == 0.0);
    }
}

TEST_CASE("distance transform equals the brute-force oracle", "[fusion][oracle]") {
    SeededRng rng(44);
    for (int trial = 0; trial < 6; ++trial) {
        MaskU8 mask(64, 64, 0);
        for (uint8_t& v : mask.data) v = rng.uniform() < 0.85 ? 1 : 0;
        WeightMap field = distance_field(mask);
        std::vector<double> want = oracle::distance_transform_reference(mask.data, 64, 64);
        double worst = 0.0;
        for (size_t i = 0; i < want.size(); ++i)
            worst = std::max(worst, std::abs(field.values[i] - want[i]));
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("enlarging coverage never shrinks distances", "[fusion][property]") {
    SeededRng rng(45);
    for (int trial = 0; trial < 10; ++trial) {
        MaskU8 mask(32, 32, 0);
        for (uint8_t& v : mask.data) v = rng.uniform() < 0.7 ? 1 : 0;
        MaskU8 bigger = mask;
        for (uint8_t& v : bigger.data)
            if (!v && rng.uniform() < 0.3) v = 1;
        WeightMap a = distance_field(mask);
        WeightMap b = distance_field(bigger);
        for (size_t i = 0; i < a.values.size(); ++i)
            if (mask.data[i]) CHECK(b.values[i] >= a.values[i] - 1e-12);
    }
}

TEST_CASE("gradient weight formula", "[fusion]") {
    SECTION("constant image weighs 1 everywhere") {
        ImageRGB img(16, 16);
        img.fill(77, 77, 77);
        WeightMap w = gradient_weight(img, 50.0);
        for (double v : w.values) CHECK(v == Catch::Approx(1.0));
    }

    SECTION("vertical step edge of 100 luma at sigma 50 weighs 0.5 on the edge") {
        ImageRGB img(32, 16);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 32; ++x) {
                uint8_t v = x >= 16 ? 100 : 0;
                uint8_t* px = img.px(x, y);
                px[0] = px[1] = px[2] = v;
            }
        WeightMap w = gradient_weight(img, 50.0);
        // Central difference halves the 100-luma step to 50 at the two
        // columns adjacent to the edge.
        CHECK(w.at(15, 8) == Catch::Approx(0.5).margin(1e-9));
        CHECK(w.at(16, 8) == Catch::Approx(0.5).margin(1e-9));
        CHECK(w.at(4, 8) == Catch::Approx(1.0));
    }

    SECTION("non-positive sigma throws") {
        ImageRGB img(8, 8);
        CHECK_THROWS_AS(gradient_weight(img, 0.0), Error);
    }
}

TEST_CASE("fusion weights multiply the four factors", "[fusion]") {
    ImageRGB flat(24, 24);
    flat.fill(90, 90, 90);

    SECTION("single primary view: bonus times the distance profile") {
        std::vector<WarpedView> views{full_view(flat, 1.0, true)};
        FusionConfig cfg;
        std::vector<WeightMap> w = compute_fusion_weights(views, cfg);
        WeightMap dist = distance_weight(views[0].coverage, cfg.gamma);
        for (size_t i = 0; i < w[0].values.size(); ++i)
            CHECK(w[0].values[i] ==
                  Catch::Approx(cfg.primary_bonus * dist.values[i]).margin(1e-12));
    }

    SECTION("zero quality zeroes the map") {
        std::vector<WarpedView> views{full_view(flat, 0.0)};
        std::vector<WeightMap> w = compute_fusion_weights(views);
        for (double v : w[0].values) CHECK(v == 0.0);
    }

    SECTION("primary map is exactly bonus times the twin's") {
        ImageRGB textured = noisy_image(24, 24, 6);
        std::vector<WarpedView> views{full_view(textured, 1.0, true),
                                      full_view(textured, 1.0, false)};
        FusionConfig cfg;
        cfg.primary_bonus = 1.5;
        std::vector<WeightMap> w = compute_fusion_weights(views, cfg);
        for (size_t i = 0; i < w[0].values.size(); ++i)
            CHECK(w[0].values[i] == Catch::Approx(1.5 * w[1].values[i]).margin(1e-12));
    }
}

TEST_CASE("blend arithmetic", "[fusion]") {
    ImageRGB a(8, 8), b(8, 8);
    a.fill(100, 100, 100);
    b.fill(200, 200, 200);

    SECTION("single view reproduces itself on its coverage") {
        ImageRGB img = noisy_image(8, 8, 9);
        std::vector<WarpedView> views{full_view(img)};
        std::vector<WeightMap> w{WeightMap(8, 8, 0.37)};
        StitchResult r = blend(views, w);
        CHECK(r.image == img);
        CHECK(r.hole_mask.count_nonzero() == 0);
    }

    SECTION("equal weights average; 1:3 weights pull toward the heavier view") {
        std::vector<WarpedView> views{full_view(a), full_view(b)};
        StitchResult even = blend(views, {WeightMap(8, 8, 1.0), WeightMap(8, 8, 1.0)});
        CHECK(even.image.px(4, 4)[0] == 150);
        StitchResult skew = blend(views, {WeightMap(8, 8, 1.0), WeightMap(8, 8, 3.0)});
        CHECK(skew.image.px(4, 4)[0] == 175);
    }

    SECTION("zero total weight becomes a black hole pixel") {
        std::vector<WarpedView> views{full_view(a)};
        WeightMap w(8, 8, 1.0);
        w.at(3, 3) = 0.0;
        StitchResult r = blend(views, {w});
        CHECK(r.hole_mask.at(3, 3) == 1);
        CHECK(r.image.px(3, 3)[0] == 0);
        CHECK(r.hole_mask.count_nonzero() == 1);
    }

    SECTION("empty view list throws") {
        CHECK_THROWS_AS(blend({}, {}), Error);
    }
}

TEST_CASE("blend is invariant to common weight rescaling", "[fusion][property]") {
    ImageRGB x = noisy_image(16, 16, 10);
    ImageRGB y = noisy_image(16, 16, 11);
    std::vector<WarpedView> views{full_view(x), full_view(y)};
    SeededRng rng(12);
    WeightMap wx(16, 16), wy(16, 16);
    for (double& v : wx.values) v = rng.uniform(0.1, 2.0);
    for (double& v : wy.values) v = rng.uniform(0.1, 2.0);

    StitchResult base = blend(views, {wx, wy});
    WeightMap sx = wx, sy = wy;
    for (double& v : sx.values) v *= 41.7;
    for (double& v : sy.values) v *= 41.7;
    StitchResult scaled = blend(views, {sx, sy});
    CHECK(base.image == scaled.image);
}

TEST_CASE("partition of unity: blending copies reproduces the image", "[fusion][property]") {
    ImageRGB img = noisy_image(32, 32, 13);
    for (int k : {1, 2, 4}) {
        std::vector<WarpedView> views;
        std::vector<WeightMap> weights;
        SeededRng rng(100 + k);
        for (int i = 0; i < k; ++i) {
            views.push_back(full_view(img));
            WeightMap w(32, 32);
            for (double& v : w.values) v = rng.uniform(0.05, 1.0);
            weights.push_back(std::move(w));
        }
        StitchResult r = blend(views, weights);
        int worst = 0;
        for (size_t i = 0; i < img.data.size(); ++i)
            worst = std::max(worst, std::abs(int(r.image.data[i]) - int(img.data[i])));
        CHECK(worst <= 1);
        if (k == 1) CHECK(r.image == img);
    }
}
