#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "ctca/common.hpp"
#include "ctca/dataset.hpp"
#include "ctca/rng.hpp"

using namespace ctca;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::path("/tmp") / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

DatasetSpec tiny_spec(const std::string& dir) {
    DatasetSpec spec;
    spec.out_dir = dir;
    spec.seed = 7;
    spec.symbols = "abcdef";
    spec.base_writers = 2;
    spec.lines_per_base_writer = 6;
    spec.target_writers = 1;
    spec.lines_per_target_writer = 512;
    spec.min_chars = 3;
    spec.max_chars = 5;
    return spec;
}

} // namespace

TEST_CASE("canonical glyphs are deterministic and in the unit square") {
    const Glyph a1 = canonical_glyph('a');
    const Glyph a2 = canonical_glyph('a');
    const Glyph b = canonical_glyph('b');
    REQUIRE(!a1.strokes.empty());
    CHECK(a1.strokes == a2.strokes);
    CHECK(a1.strokes != b.strokes);
    for (const auto& stroke : a1.strokes) {
        CHECK(stroke.size() >= 2);
        for (const auto& pt : stroke) {
            CHECK(pt[0] >= 0.0);
            CHECK(pt[0] <= 1.0);
            CHECK(pt[1] >= 0.0);
            CHECK(pt[1] <= 1.0);
        }
    }
}

TEST_CASE("writer divergence scales glyph displacement") {
    const std::string symbols = "abcdef";
    const WriterStyle faithful = make_writer(11, 1, 0.0, symbols);
    const WriterStyle mild = make_writer(11, 1, 0.3, symbols);
    const WriterStyle wild = make_writer(11, 1, 0.9, symbols);
    CHECK(mean_glyph_displacement(faithful) == 0.0);
    const double d_mild = mean_glyph_displacement(mild);
    const double d_wild = mean_glyph_displacement(wild);
    CHECK(d_mild > 0.0);
    CHECK(d_wild > d_mild);
    // Same seed and id give the same style.
    const WriterStyle again = make_writer(11, 1, 0.3, symbols);
    CHECK(mean_glyph_displacement(again) == d_mild);
    // Different writers diverge differently.
    const WriterStyle other = make_writer(11, 2, 0.3, symbols);
    CHECK(mean_glyph_displacement(other) != d_mild);
    CHECK_THROWS_AS(make_writer(11, 1, 1.5, symbols), ConfigError);
}

TEST_CASE("render_line produces height-40 images scaling with text length") {
    const WriterStyle writer = make_writer(3, 0, 0.2, "abc");
    RngStream rng(5);
    const Image shorter = render_line(writer, "abc", rng);
    const Image longer = render_line(writer, "abcabcabc", rng);
    CHECK(shorter.height == kLineHeight);
    CHECK(longer.height == kLineHeight);
    CHECK(shorter.channels == 1);
    CHECK(longer.width > shorter.width);
    // Ink present: some pixels well below the white background.
    const double darkest = *std::min_element(shorter.data.begin(), shorter.data.end());
    CHECK(darkest < 0.5);
    RngStream rng_a(5), rng_b(5);
    const Image r1 = render_line(writer, "abc", rng_a);
    const Image r2 = render_line(writer, "abc", rng_b);
    CHECK(r1.data == r2.data);
    CHECK_THROWS_AS(render_line(writer, "", rng), ConfigError);
    CHECK_THROWS_AS(render_line(writer, "xyz", rng), ConfigError);
}

TEST_CASE("build_dataset writes a loadable, deterministic manifest") {
    TempDir dir_a("ctca_ds_a");
    TempDir dir_b("ctca_ds_b");
    const DatasetManifest m1 = build_dataset(tiny_spec(dir_a.path.string()));
    const DatasetManifest m2 = build_dataset(tiny_spec(dir_b.path.string()));

    REQUIRE(m1.records.size() == 2 * 6 + 512);
    CHECK(m1.records.size() == m2.records.size());
    for (size_t i = 0; i < m1.records.size(); ++i) {
        CHECK(m1.records[i].text == m2.records[i].text);
        CHECK(m1.records[i].writer_id == m2.records[i].writer_id);
        CHECK(m1.records[i].split == m2.records[i].split);
    }

    // Manifest round-trip: the loaded file matches what build returned, and
    // rewriting gives identical bytes.
    const DatasetManifest loaded = load_manifest(dir_a.path.string());
    REQUIRE(loaded.records.size() == m1.records.size());
    for (size_t i = 0; i < m1.records.size(); ++i) {
        CHECK(loaded.records[i].image_path == m1.records[i].image_path);
        CHECK(loaded.records[i].text == m1.records[i].text);
    }
    std::ifstream f1(dir_a.path / "manifest.jsonl", std::ios::binary);
    std::ifstream f2(dir_b.path / "manifest.jsonl", std::ios::binary);
    const std::string bytes1((std::istreambuf_iterator<char>(f1)), {});
    const std::string bytes2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(bytes1 == bytes2);
    CHECK(!bytes1.empty());
}

TEST_CASE("target writers split 256 test and 256 adaptation") {
    TempDir dir("ctca_ds_split");
    build_dataset(tiny_spec(dir.path.string()));
    const Dataset ds(dir.path.string());
    const std::vector<int> targets = ds.target_writer_ids();
    REQUIRE(targets.size() == 1);
    CHECK(ds.indices(targets[0], Split::test).size() == 256);
    CHECK(ds.indices(targets[0], Split::adaptation).size() == 256);
    CHECK(ds.indices(Split::train).size() == 12);

    DatasetSpec bad = tiny_spec((dir.path / "bad").string());
    bad.lines_per_target_writer = 100;
    CHECK_THROWS_AS(build_dataset(bad), ProtocolError);
}

TEST_CASE("dataset images decode to height-40 grayscale") {
    TempDir dir("ctca_ds_img");
    build_dataset(tiny_spec(dir.path.string()));
    const Dataset ds(dir.path.string());
    const Image img = ds.image(0);
    CHECK(img.height == kLineHeight);
    CHECK(img.channels == 1);
    CHECK(img.width > 0);
    for (double v : img.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("assemble_batch pads to the width multiple with white background") {
    TempDir dir("ctca_ds_batch");
    build_dataset(tiny_spec(dir.path.string()));
    const Dataset ds(dir.path.string());

    BatchOptions options;
    options.width_multiple = 16;
    const std::vector<size_t> idx = {0, 1, 2};
    const Batch batch = ds.assemble_batch(idx, options, nullptr);
    REQUIRE(batch.images.shape.size() == 4);
    CHECK(batch.images.shape[0] == 3);
    CHECK(batch.images.shape[1] == 1);
    CHECK(batch.images.shape[2] == kLineHeight);
    CHECK(batch.images.shape[3] % 16 == 0);
    const int64_t padded = batch.images.shape[3];
    int64_t max_w = 0;
    for (int64_t w : batch.widths) max_w = std::max(max_w, w);
    CHECK(padded >= max_w);
    CHECK(padded - max_w < 16);

    // Padding columns beyond each sample's width are exactly background.
    for (size_t n = 0; n < idx.size(); ++n) {
        const int64_t w = batch.widths[n];
        for (int64_t x = w; x < padded; ++x) {
            const double v =
                batch.images
                    .data[(n * batch.images.shape[1] * kLineHeight + 0 * kLineHeight + 5) * padded + x];
            CHECK(v == 1.0);
        }
    }

    // Targets encode the texts.
    REQUIRE(batch.targets.size() == 3);
    for (size_t n = 0; n < 3; ++n) {
        CHECK(batch.targets[n].size() == batch.texts[n].size());
        CHECK(ds.alphabet().decode(batch.targets[n]) == batch.texts[n]);
    }

    CHECK_THROWS_AS(ds.assemble_batch({}, options, nullptr), ShapeError);
}

TEST_CASE("batch sampling is deterministic and respects the pool") {
    TempDir dir("ctca_ds_pool");
    build_dataset(tiny_spec(dir.path.string()));
    const Dataset ds(dir.path.string());
    const std::vector<size_t> pool = ds.indices(Split::train);

    BatchOptions options;
    RngStream a(99), b(99);
    const Batch b1 = ds.sample_batch(pool, 4, a, options);
    const Batch b2 = ds.sample_batch(pool, 4, b, options);
    CHECK(b1.texts == b2.texts);
    CHECK(b1.images.data == b2.images.data);

    std::set<std::string> pool_texts;
    for (size_t i : pool) pool_texts.insert(ds.manifest().records[i].text);
    for (const std::string& t : b1.texts) CHECK(pool_texts.count(t) == 1);
}

TEST_CASE("augmented batches differ but are reproducible") {
    TempDir dir("ctca_ds_aug");
    build_dataset(tiny_spec(dir.path.string()));
    const Dataset ds(dir.path.string());
    const AugmentationCombo combo = parse_combo("B2C2G3M2");

    BatchOptions plain;
    BatchOptions augmented;
    augmented.combo = &combo;

    const std::vector<size_t> idx = {0, 1, 2, 3};
    RngStream rng1(123), rng2(123), rng3(321);
    const Batch base = ds.assemble_batch(idx, plain, nullptr);
    const Batch aug_a = ds.assemble_batch(idx, augmented, &rng1);
    const Batch aug_b = ds.assemble_batch(idx, augmented, &rng2);
    const Batch aug_c = ds.assemble_batch(idx, augmented, &rng3);

    CHECK(aug_a.images.data == aug_b.images.data);
    CHECK(aug_a.images.data != base.images.data);
    CHECK(aug_a.images.data != aug_c.images.data);
    CHECK(aug_a.targets == base.targets);

    CHECK_THROWS_AS(ds.assemble_batch(idx, augmented, nullptr), ShapeError);
}
