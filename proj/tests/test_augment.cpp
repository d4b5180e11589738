#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "ctca/augment.hpp"
#include "ctca/common.hpp"
#include "ctca/image.hpp"
#include "ctca/rng.hpp"

using namespace ctca;

namespace {

Image test_image() {
    Image img(1, 16, 48);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            img.at(0, y, x) = 0.5 + 0.5 * ((x * 7 + y * 13) % 32) / 31.0 - 0.25;
        }
    }
    return img;
}

bool same_pixels(const Image& a, const Image& b) {
    return a.channels == b.channels && a.height == b.height && a.width == b.width &&
           a.data == b.data;
}

} // namespace

TEST_CASE("combo parsing accepts the registered set") {
    for (const std::string& name : registered_combos()) {
        const AugmentationCombo combo = parse_combo(name);
        CHECK(combo.name == name);
        if (name == "NONE") {
            CHECK(combo.parts.empty());
        } else {
            CHECK(!combo.parts.empty());
        }
    }
    CHECK(registered_combos().size() == 14);

    const AugmentationCombo full = parse_combo("B2C2G3M2");
    REQUIRE(full.parts.size() == 4);
    CHECK(full.parts[0].kind == AugKind::NoiseBlurGamma);
    CHECK(full.parts[0].level == 2);
    CHECK(full.parts[2].kind == AugKind::Geometry);
    CHECK(full.parts[2].level == 3);
    CHECK(full.has_color());
    CHECK(!parse_combo("B1G1").has_color());
}

TEST_CASE("combo parsing rejects misordered, duplicate and out-of-range parts") {
    CHECK_THROWS_AS(parse_combo("C1B1"), RegistryError);
    CHECK_THROWS_AS(parse_combo("B1B2"), RegistryError);
    CHECK_THROWS_AS(parse_combo("M1G1"), RegistryError);
    CHECK_THROWS_AS(parse_combo("B3"), RegistryError);
    CHECK_THROWS_AS(parse_combo("G4"), RegistryError);
    CHECK_THROWS_AS(parse_combo("B0"), RegistryError);
    CHECK_THROWS_AS(parse_combo("X1"), RegistryError);
    CHECK_THROWS_AS(parse_combo("B"), RegistryError);
    CHECK_THROWS_AS(parse_combo(""), RegistryError);
    CHECK_THROWS_AS(parse_combo("b1"), RegistryError);
}

TEST_CASE("firing probabilities match the published constants") {
    CHECK(apply_probability(AugKind::NoiseBlurGamma) == 0.2);
    CHECK(apply_probability(AugKind::Color) == 0.333);
    CHECK(apply_probability(AugKind::Geometry) == 0.66);
    CHECK(apply_probability(AugKind::Masking) == 0.5);
}

TEST_CASE("NONE is a bitwise identity") {
    const Image img = test_image();
    RngStream rng(1);
    const Image out = apply_combo(parse_combo("NONE"), img, rng);
    CHECK(same_pixels(img, out));
}

TEST_CASE("neutral parameters leave every core bitwise unchanged") {
    const Image img = test_image();
    CHECK(same_pixels(img, apply_noise_blur_gamma_with(img, NoiseBlurGammaParams{})));
    CHECK(same_pixels(img, apply_geometry_with(img, GeometryParams{})));
    CHECK(same_pixels(img, apply_masking_with(img, {})));
    const Image rgb = to_rgb(img);
    CHECK(same_pixels(rgb, apply_color_with(rgb, ColorParams{})));
    // Gray input is promoted to RGB but the channel values stay put.
    const Image promoted = apply_color_with(img, ColorParams{});
    CHECK(promoted.channels == 3);
    CHECK(same_pixels(promoted, rgb));
}

TEST_CASE("same stream gives identical augmented pixels") {
    const Image img = test_image();
    for (const char* name : {"B2C2G3M2", "B1C1G1M1", "G3"}) {
        RngStream a(777), b(777);
        const Image out_a = apply_combo(parse_combo(name), img, a);
        const Image out_b = apply_combo(parse_combo(name), img, b);
        CHECK(same_pixels(out_a, out_b));
    }
}

TEST_CASE("golden hashes are stable") {
    const Image img = test_image();
    CHECK(image_hash(img) == 0x059f6ef90b1f25a5ULL);

    // Whole-combo draws capture the fire/skip decision stream as well.
    {
        RngStream rng(20260823);
        CHECK(image_hash(apply_combo(parse_combo("B2C2G3M2"), img, rng)) ==
              0xc425006a2d203818ULL);
    }
    {
        RngStream rng(20260823);
        CHECK(image_hash(apply_combo(parse_combo("B1C1G1M1"), img, rng)) ==
              0x67bdf6da607ee694ULL);
    }

    // Forced single-part applications.
    {
        RngStream rng(5);
        CHECK(image_hash(apply_noise_blur_gamma(img, 2, rng)) == 0xb7b0cb655b1cdff1ULL);
    }
    {
        RngStream rng(5);
        CHECK(image_hash(apply_color(img, 2, rng)) == 0xd68b28510763b2f3ULL);
    }
    {
        RngStream rng(5);
        CHECK(image_hash(apply_masking(img, 2, rng)) == 0x08ff31e2cabe97d4ULL);
    }
    {
        RngStream rng(100);
        CHECK(image_hash(apply_geometry(img, 1, rng)) == 0xf421cdeec1ca4c0bULL);
    }

    // Fixed deterministic cores.
    NoiseBlurGammaParams nb;
    nb.blur_length = 5;
    nb.blur_angle = 0.7;
    nb.noise_sigma = 10.0 / 255.0;
    nb.gamma = 1.8;
    nb.noise_key = 123;
    CHECK(image_hash(apply_noise_blur_gamma_with(img, nb)) == 0xb70a51246b83c597ULL);

    ColorParams cp;
    cp.brightness_shift = 0.1;
    cp.contrast = 1.2;
    cp.saturation = 0.8;
    cp.hue_shift = 0.04;
    CHECK(image_hash(apply_color_with(img, cp)) == 0x2f340882596f82d1ULL);

    GeometryParams gp;
    gp.slant_mid = 0.2;
    gp.slant_amp = 0.1;
    gp.slant_period = 100;
    gp.slant_phase = 1.0;
    gp.hscale_mid = 1.1;
    gp.hscale_amp = 0.05;
    gp.hscale_period = 120;
    gp.hscale_phase = 2.0;
    gp.vscale_mid = 0.95;
    gp.vscale_amp = 0.03;
    gp.vscale_period = 90;
    gp.vscale_phase = 0.5;
    CHECK(image_hash(apply_geometry_with(img, gp)) == 0x2baeecbf2373561fULL);
}

TEST_CASE("geometry restores the original width for any draw") {
    const Image img = test_image();
    RngStream rng(31337);
    for (int trial = 0; trial < 25; ++trial) {
        const int level = 1 + static_cast<int>(rng.uniform_int(0, 2));
        const Image out = apply_geometry(img, level, rng);
        CHECK(out.width == img.width);
        CHECK(out.height == img.height);
        CHECK(out.channels == img.channels);
    }
}

TEST_CASE("masking overwrites only the requested columns") {
    const Image img = test_image();
    std::vector<MaskPatch> patches;
    patches.push_back({10, 5, 42});
    const Image out = apply_masking_with(img, patches);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (x >= 10 && x < 15) continue;
            CHECK(out.at(0, y, x) == img.at(0, y, x));
        }
    }
    // Full height of the patch is overwritten with noise in [0,1).
    int changed = 0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 10; x < 15; ++x) {
            if (out.at(0, y, x) != img.at(0, y, x)) ++changed;
            CHECK(out.at(0, y, x) >= 0.0);
            CHECK(out.at(0, y, x) < 1.0);
        }
    }
    CHECK(changed > 70); // 80 cells; collisions with the old value are rare

    CHECK_THROWS_AS(apply_masking_with(img, {{44, 10, 1}}), ShapeError);
    CHECK_THROWS_AS(apply_masking_with(img, {{-1, 3, 1}}), ShapeError);
}

TEST_CASE("per-part firing rates match their probabilities over many draws") {
    // A fired part changes the pixel data with probability 1 (its parameter
    // draws are continuous), so the observed change rate estimates the firing
    // probability.
    const Image img = test_image();
    const int draws = 10000;
    const struct {
        const char* combo;
        double expected;
    } cases[] = {{"B2", 0.2}, {"C1", 0.333}, {"G2", 0.66}, {"M1", 0.5}};
    RngStream rng(4242);
    for (const auto& c : cases) {
        const AugmentationCombo combo = parse_combo(c.combo);
        int fired = 0;
        for (int i = 0; i < draws; ++i) {
            const Image out = apply_combo(combo, img, rng);
            if (!same_pixels(out, img)) ++fired;
        }
        const double rate = static_cast<double>(fired) / draws;
        CHECK(std::abs(rate - c.expected) <= 0.02);
    }
}

TEST_CASE("levels outside the registered range are rejected") {
    const Image img = test_image();
    RngStream rng(1);
    CHECK_THROWS_AS(apply_noise_blur_gamma(img, 3, rng), RegistryError);
    CHECK_THROWS_AS(apply_color(img, 0, rng), RegistryError);
    CHECK_THROWS_AS(apply_geometry(img, 4, rng), RegistryError);
    CHECK_THROWS_AS(apply_masking(img, 3, rng), RegistryError);
}
