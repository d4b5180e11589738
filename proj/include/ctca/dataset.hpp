#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctca/augment.hpp"
#include "ctca/ctc.hpp"
#include "ctca/image.hpp"
#include "ctca/rng.hpp"
#include "ctca/tensor.hpp"

namespace ctca {

// Synthetic handwriting: every character has a canonical polyline glyph
// derived from a fixed internal key; a writer displaces the control points
// by an amount scaled with its divergence, so writers form a style family
// around the canonical shapes.

struct Glyph {
    // Strokes as polylines in the unit square (x right, y down).
    std::vector<std::vector<std::array<double, 2>>> strokes;
};

Glyph canonical_glyph(char c);

struct WriterStyle {
    int writer_id = 0;
    double divergence = 0.0;
    double slant = 0.0;
    double stroke_width = 1.5;
    double spacing = 0.15;       // fraction of nominal glyph width
    double wobble_amp = 0.0;     // baseline wobble, pixels
    double wobble_period = 160;  // pixels
    std::map<char, Glyph> glyphs;
};

WriterStyle make_writer(uint64_t seed, int writer_id, double divergence,
                        const std::string& symbols);

// Mean absolute control-point displacement of a writer's glyphs from the
// canonical shapes; the measurable definition of style divergence.
double mean_glyph_displacement(const WriterStyle& style);

constexpr int kLineHeight = 40;

// Rasterizes text to a grayscale line image of height 40; width follows the
// glyph advances. The stream drives per-sample jitter (glyph widths, ink
// darkness, wobble phase).
Image render_line(const WriterStyle& style, const std::string& text, RngStream& rng);

enum class Split { train, test, adaptation };
const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct ManifestRecord {
    std::string image_path;  // relative to the dataset directory
    std::string text;
    int writer_id = 0;
    Split split = Split::train;
};

struct DatasetSpec {
    std::string out_dir;
    uint64_t seed = 1;
    std::string symbols = "abcdefghijklmnopqrstuvwxyz";
    int base_writers = 8;
    int lines_per_base_writer = 200;
    int target_writers = 5;
    int lines_per_target_writer = 512;
    int min_chars = 3;
    int max_chars = 6;
    double base_divergence = 0.35;
    double target_divergence = 0.8;
    std::string corpus_path;  // empty: seeded random phrases
};

struct DatasetManifest {
    DatasetSpec spec;
    std::vector<ManifestRecord> records;
};

// Renders all lines, writes images plus manifest.jsonl and dataset.json
// under spec.out_dir. Target writers get 256 test + 256 adaptation records;
// fewer than 512 lines for a target writer is a protocol error.
DatasetManifest build_dataset(const DatasetSpec& spec);

DatasetManifest load_manifest(const std::string& dir);

struct Batch {
    Tensor images;  // [N,C,40,W], background 1.0
    std::vector<std::vector<int>> targets;
    std::vector<std::string> texts;
    std::vector<int64_t> widths;  // pre-padding widths
};

struct BatchOptions {
    int width_multiple = 1;
    int channels = 1;
    const AugmentationCombo* combo = nullptr;  // null: no augmentation
};

// In-memory dataset with decoded image cache.
class Dataset {
public:
    explicit Dataset(const std::string& dir);

    const DatasetManifest& manifest() const { return manifest_; }
    const Alphabet& alphabet() const { return alphabet_; }
    size_t size() const { return manifest_.records.size(); }

    std::vector<size_t> indices(Split split) const;
    std::vector<size_t> indices(int writer_id, Split split) const;
    std::vector<int> target_writer_ids() const;

    Image image(size_t index) const;  // grayscale, cached

    // Deterministic batch assembly over explicit records; aug_rng drives
    // per-sample augmentation substreams and may be null when no combo is
    // set.
    Batch assemble_batch(const std::vector<size_t>& batch_indices, const BatchOptions& options,
                         RngStream* aug_rng) const;

    // Uniform with replacement from pool, then assemble.
    Batch sample_batch(const std::vector<size_t>& pool, int batch_size, RngStream& rng,
                       const BatchOptions& options) const;

private:
    std::string dir_;
    DatasetManifest manifest_;
    Alphabet alphabet_;
    mutable std::vector<std::optional<Image8>> cache_;
};

}  // namespace ctca
