#include "ctca/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "ctca/png_io.hpp"

namespace ctca {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr uint64_t kGlyphSalt = 0x676c797068ULL;    // canonical glyph shapes
constexpr uint64_t kStyleSalt = 0x7374796c65ULL;    // per-writer displacement
constexpr uint64_t kParamSalt = 0x706172616dULL;    // per-writer style params
constexpr uint64_t kTextSalt = 0x74657874ULL;       // phrase generation
constexpr uint64_t kRenderSalt = 0x72656e64ULL;     // per-line jitter

constexpr double kGlyphWidth = 16.0;  // nominal advance, pixels
constexpr double kGlyphTop = 8.0;
constexpr double kGlyphBottom = 32.0;
constexpr double kMargin = 3.0;

double point_segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double wx = px - ax, wy = py - ay;
    const double vv = vx * vx + vy * vy;
    double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (ax + t * vx);
    const double dy = py - (ay + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

void draw_segment(Image& img, double ax, double ay, double bx, double by, double radius,
                  double darkness) {
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(ax, bx) - radius - 1.0)));
    const int x1 = std::min(img.width - 1,
                            static_cast<int>(std::ceil(std::max(ax, bx) + radius + 1.0)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(ay, by) - radius - 1.0)));
    const int y1 = std::min(img.height - 1,
                            static_cast<int>(std::ceil(std::max(ay, by) + radius + 1.0)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double d = point_segment_distance(x, y, ax, ay, bx, by);
            const double cov = std::clamp(radius + 0.5 - d, 0.0, 1.0) * darkness;
            if (cov <= 0.0) continue;
            double& v = img.at(0, y, x);
            v = std::min(v, 1.0 - cov);
        }
    }
}

std::string image_name(int writer_id, int line_index) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "images/w%04d_%05d.png", writer_id, line_index);
    return buf;
}

std::string random_phrase(RngStream& rng, const std::string& symbols, int min_chars,
                          int max_chars) {
    const int len = static_cast<int>(rng.uniform_int(min_chars, max_chars));
    std::string out;
    out.reserve(static_cast<size_t>(len));
    for (int i = 0; i < len; ++i) {
        out.push_back(symbols[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(symbols.size()) - 1))]);
    }
    return out;
}

std::vector<std::string> load_corpus(const std::string& path, const Alphabet& alphabet) {
    std::ifstream in(path);
    if (!in) throw IoError("corpus file not readable: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        for (char c : line) alphabet.class_of(c);  // validates
        lines.push_back(line);
    }
    if (lines.empty()) throw ConfigError("corpus file has no usable lines: " + path);
    return lines;
}

json spec_to_json(const DatasetSpec& spec) {
    return json{{"seed", spec.seed},
                {"symbols", spec.symbols},
                {"base_writers", spec.base_writers},
                {"lines_per_base_writer", spec.lines_per_base_writer},
                {"target_writers", spec.target_writers},
                {"lines_per_target_writer", spec.lines_per_target_writer},
                {"min_chars", spec.min_chars},
                {"max_chars", spec.max_chars},
                {"base_divergence", spec.base_divergence},
                {"target_divergence", spec.target_divergence},
                {"corpus_path", spec.corpus_path}};
}

DatasetSpec spec_from_json(const json& j) {
    DatasetSpec spec;
    spec.seed = j.at("seed").get<uint64_t>();
    spec.symbols = j.at("symbols").get<std::string>();
    spec.base_writers = j.at("base_writers").get<int>();
    spec.lines_per_base_writer = j.at("lines_per_base_writer").get<int>();
    spec.target_writers = j.at("target_writers").get<int>();
    spec.lines_per_target_writer = j.at("lines_per_target_writer").get<int>();
    spec.min_chars = j.at("min_chars").get<int>();
    spec.max_chars = j.at("max_chars").get<int>();
    spec.base_divergence = j.at("base_divergence").get<double>();
    spec.target_divergence = j.at("target_divergence").get<double>();
    spec.corpus_path = j.at("corpus_path").get<std::string>();
    return spec;
}

}  // namespace

Glyph canonical_glyph(char c) {
    RngStream rng(kGlyphSalt, static_cast<unsigned char>(c));
    Glyph g;
    const int strokes = static_cast<int>(rng.uniform_int(2, 3));
    for (int s = 0; s < strokes; ++s) {
        const int points = static_cast<int>(rng.uniform_int(3, 5));
        std::vector<std::array<double, 2>> poly;
        poly.reserve(static_cast<size_t>(points));
        for (int i = 0; i < points; ++i) {
            poly.push_back({rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)});
        }
        g.strokes.push_back(std::move(poly));
    }
    return g;
}

WriterStyle make_writer(uint64_t seed, int writer_id, double divergence,
                        const std::string& symbols) {
    if (divergence < 0.0 || divergence > 1.0) {
        throw ConfigError("make_writer: divergence " + std::to_string(divergence) +
                          " outside [0,1]");
    }
    WriterStyle style;
    style.writer_id = writer_id;
    style.divergence = divergence;
    RngStream params(mix_seed(seed, kParamSalt), static_cast<uint64_t>(writer_id));
    style.slant = params.uniform(-0.2, 0.2);
    style.stroke_width = params.uniform(1.1, 2.0);
    style.spacing = params.uniform(0.08, 0.28);
    style.wobble_amp = params.uniform(0.0, 1.5);
    style.wobble_period = params.uniform(100.0, 240.0);

    const uint64_t writer_key = mix_seed(mix_seed(seed, kStyleSalt), static_cast<uint64_t>(writer_id));
    for (char c : symbols) {
        Glyph g = canonical_glyph(c);
        RngStream disp(writer_key, static_cast<unsigned char>(c));
        for (auto& stroke : g.strokes) {
            for (auto& pt : stroke) {
                pt[0] = std::clamp(pt[0] + divergence * disp.gauss(0.0, 0.08), 0.0, 1.0);
                pt[1] = std::clamp(pt[1] + divergence * disp.gauss(0.0, 0.08), 0.0, 1.0);
            }
        }
        style.glyphs.emplace(c, std::move(g));
    }
    return style;
}

double mean_glyph_displacement(const WriterStyle& style) {
    double total = 0.0;
    int64_t count = 0;
    for (const auto& [c, glyph] : style.glyphs) {
        const Glyph canon = canonical_glyph(c);
        for (size_t s = 0; s < glyph.strokes.size(); ++s) {
            for (size_t i = 0; i < glyph.strokes[s].size(); ++i) {
                const double dx = glyph.strokes[s][i][0] - canon.strokes[s][i][0];
                const double dy = glyph.strokes[s][i][1] - canon.strokes[s][i][1];
                total += std::sqrt(dx * dx + dy * dy);
                ++count;
            }
        }
    }
    return count > 0 ? total / static_cast<double>(count) : 0.0;
}

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::test: return "test";
        case Split::adaptation: return "adaptation";
    }
    throw ConfigError("unknown split");
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "test") return Split::test;
    if (name == "adaptation") return Split::adaptation;
    throw ConfigError("unknown split name '" + name + "'");
}

Image render_line(const WriterStyle& style, const std::string& text, RngStream& rng) {
    if (text.empty()) throw ConfigError("render_line: empty text");
    std::vector<double> advances;
    advances.reserve(text.size());
    double content = 0.0;
    for (size_t i = 0; i < text.size(); ++i) {
        const double adv = kGlyphWidth * rng.uniform(0.85, 1.15);
        advances.push_back(adv);
        content += adv;
        if (i + 1 < text.size()) content += style.spacing * kGlyphWidth;
    }
    const double wobble_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double darkness = rng.uniform(0.7, 1.0);

    int width = static_cast<int>(std::ceil(2.0 * kMargin + content));
    width = std::max(width, 8 * static_cast<int>(text.size()));
    Image img(1, kLineHeight, width, 1.0);

    const double glyph_h = kGlyphBottom - kGlyphTop;
    double cursor = kMargin;
    for (size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c != ' ') {
            auto it = style.glyphs.find(c);
            if (it == style.glyphs.end()) {
                throw ConfigError(std::string("render_line: writer has no glyph for '") + c +
                                  "'");
            }
            for (const auto& stroke : it->second.strokes) {
                for (size_t k = 0; k + 1 < stroke.size(); ++k) {
                    auto map_pt = [&](const std::array<double, 2>& pt) {
                        double y = kGlyphTop + pt[1] * glyph_h;
                        double x = cursor + pt[0] * advances[i] + style.slant * (kGlyphBottom - y);
                        y += style.wobble_amp *
                             std::sin(2.0 * std::numbers::pi * x / style.wobble_period +
                                      wobble_phase);
                        return std::array<double, 2>{x, y};
                    };
                    const auto a = map_pt(stroke[k]);
                    const auto b = map_pt(stroke[k + 1]);
                    draw_segment(img, a[0], a[1], b[0], b[1], style.stroke_width / 2.0, darkness);
                }
            }
        }
        cursor += advances[i] + style.spacing * kGlyphWidth;
    }
    return img;
}

DatasetManifest build_dataset(const DatasetSpec& spec) {
    if (spec.out_dir.empty()) throw ConfigError("build_dataset: out_dir is empty");
    if (spec.symbols.empty()) throw ConfigError("build_dataset: empty symbol set");
    if (spec.min_chars < 1 || spec.max_chars < spec.min_chars) {
        throw ConfigError("build_dataset: invalid phrase length range");
    }
    if (spec.target_writers > 0 && spec.lines_per_target_writer < 512) {
        throw ProtocolError("build_dataset: target writers need at least 512 lines (256 test + "
                            "256 adaptation), got " +
                            std::to_string(spec.lines_per_target_writer));
    }
    const Alphabet alphabet(spec.symbols);
    std::vector<std::string> corpus;
    if (!spec.corpus_path.empty()) corpus = load_corpus(spec.corpus_path, alphabet);

    fs::create_directories(fs::path(spec.out_dir) / "images");

    DatasetManifest manifest;
    manifest.spec = spec;
    size_t corpus_pos = 0;
    auto next_text = [&](RngStream& text_rng) {
        if (corpus.empty()) {
            return random_phrase(text_rng, spec.symbols, spec.min_chars, spec.max_chars);
        }
        return corpus[corpus_pos++ % corpus.size()];
    };

    const int total_writers = spec.base_writers + spec.target_writers;
    for (int w = 0; w < total_writers; ++w) {
        const bool is_target = w >= spec.base_writers;
        RngStream div_rng(mix_seed(spec.seed, 0x646976ULL), static_cast<uint64_t>(w));
        const double center = is_target ? spec.target_divergence : spec.base_divergence;
        const double divergence = std::clamp(center * div_rng.uniform(0.8, 1.2), 0.0, 1.0);
        const WriterStyle style = make_writer(spec.seed, w, divergence, spec.symbols);
        RngStream text_rng(mix_seed(spec.seed, kTextSalt), static_cast<uint64_t>(w));
        const int lines = is_target ? spec.lines_per_target_writer : spec.lines_per_base_writer;
        for (int i = 0; i < lines; ++i) {
            const std::string text = next_text(text_rng);
            RngStream render_rng =
                RngStream(mix_seed(spec.seed, kRenderSalt), static_cast<uint64_t>(w))
                    .substream(static_cast<uint64_t>(i));
            const Image img = render_line(style, text, render_rng);
            const std::string rel = image_name(w, i);
            save_png((fs::path(spec.out_dir) / rel).string(), quantize(img));
            ManifestRecord rec;
            rec.image_path = rel;
            rec.text = text;
            rec.writer_id = w;
            rec.split = !is_target          ? Split::train
                        : (i < 256)         ? Split::test
                                            : Split::adaptation;
            manifest.records.push_back(std::move(rec));
        }
    }

    {
        std::ofstream meta(fs::path(spec.out_dir) / "dataset.json",
                           std::ios::binary | std::ios::trunc);
        if (!meta) throw IoError("build_dataset: cannot write dataset.json");
        meta << spec_to_json(spec).dump(2) << "\n";
    }
    {
        std::ofstream mf(fs::path(spec.out_dir) / "manifest.jsonl",
                         std::ios::binary | std::ios::trunc);
        if (!mf) throw IoError("build_dataset: cannot write manifest.jsonl");
        for (const ManifestRecord& rec : manifest.records) {
            mf << json{{"image", rec.image_path},
                       {"split", split_name(rec.split)},
                       {"text", rec.text},
                       {"writer", rec.writer_id}}
                      .dump()
               << "\n";
        }
    }
    return manifest;
}

DatasetManifest load_manifest(const std::string& dir) {
    std::ifstream meta(fs::path(dir) / "dataset.json");
    if (!meta) throw IoError("load_manifest: missing dataset.json in " + dir);
    json meta_j = json::parse(meta, nullptr, true);
    DatasetManifest manifest;
    manifest.spec = spec_from_json(meta_j);
    manifest.spec.out_dir = dir;

    std::ifstream mf(fs::path(dir) / "manifest.jsonl");
    if (!mf) throw IoError("load_manifest: missing manifest.jsonl in " + dir);
    std::string line;
    size_t line_no = 0;
    while (std::getline(mf, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line);
        ManifestRecord rec;
        rec.image_path = j.at("image").get<std::string>();
        rec.text = j.at("text").get<std::string>();
        rec.writer_id = j.at("writer").get<int>();
        rec.split = split_from_name(j.at("split").get<std::string>());
        if (rec.text.empty()) {
            throw IoError("load_manifest: empty text at manifest line " +
                          std::to_string(line_no));
        }
        manifest.records.push_back(std::move(rec));
    }
    if (manifest.records.empty()) throw IoError("load_manifest: no records in " + dir);
    return manifest;
}

Dataset::Dataset(const std::string& dir)
    : dir_(dir), manifest_(load_manifest(dir)), alphabet_(manifest_.spec.symbols),
      cache_(manifest_.records.size()) {}

std::vector<size_t> Dataset::indices(Split split) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < manifest_.records.size(); ++i) {
        if (manifest_.records[i].split == split) out.push_back(i);
    }
    return out;
}

std::vector<size_t> Dataset::indices(int writer_id, Split split) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < manifest_.records.size(); ++i) {
        if (manifest_.records[i].writer_id == writer_id && manifest_.records[i].split == split) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<int> Dataset::target_writer_ids() const {
    std::vector<int> out;
    for (const ManifestRecord& rec : manifest_.records) {
        if (rec.split == Split::train) continue;
        if (out.empty() || out.back() != rec.writer_id) {
            if (std::find(out.begin(), out.end(), rec.writer_id) == out.end()) {
                out.push_back(rec.writer_id);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

Image Dataset::image(size_t index) const {
    if (index >= manifest_.records.size()) {
        throw ShapeError("Dataset::image: index out of range");
    }
    if (!cache_[index]) {
        cache_[index] =
            load_png((fs::path(dir_) / manifest_.records[index].image_path).string());
    }
    Image img = dequantize(*cache_[index]);
    if (img.channels != 1) img = to_gray(img);
    if (img.height != kLineHeight) {
        throw IoError("Dataset::image: " + manifest_.records[index].image_path +
                      " has height " + std::to_string(img.height) + ", expected 40");
    }
    return img;
}

Batch Dataset::assemble_batch(const std::vector<size_t>& batch_indices,
                              const BatchOptions& options, RngStream* aug_rng) const {
    if (batch_indices.empty()) throw ShapeError("assemble_batch: empty batch");
    if (options.channels != 1 && options.channels != 3) {
        throw ShapeError("assemble_batch: channels must be 1 or 3");
    }
    if (options.combo && !options.combo->parts.empty() && aug_rng == nullptr) {
        throw ShapeError("assemble_batch: augmentation requested without a stream");
    }
    const int64_t n = static_cast<int64_t>(batch_indices.size());
    std::vector<Image> images;
    images.reserve(batch_indices.size());
    Batch batch;
    int64_t max_w = 0;
    for (size_t j = 0; j < batch_indices.size(); ++j) {
        const ManifestRecord& rec = manifest_.records[batch_indices[j]];
        Image img = image(batch_indices[j]);
        if (options.combo && !options.combo->parts.empty()) {
            RngStream sample_rng = aug_rng->substream(j);
            img = apply_combo(*options.combo, img, sample_rng);
        }
        img = options.channels == 3 ? to_rgb(img) : to_gray(img);
        max_w = std::max<int64_t>(max_w, img.width);
        batch.targets.push_back(alphabet_.encode(rec.text));
        batch.texts.push_back(rec.text);
        batch.widths.push_back(img.width);
        images.push_back(std::move(img));
    }
    const int64_t mult = std::max(1, options.width_multiple);
    const int64_t padded = ((max_w + mult - 1) / mult) * mult;
    batch.images = Tensor::full({n, options.channels, kLineHeight, padded}, 1.0);
    for (int64_t j = 0; j < n; ++j) {
        const Image& img = images[static_cast<size_t>(j)];
        for (int c = 0; c < options.channels; ++c) {
            for (int y = 0; y < kLineHeight; ++y) {
                double* row = batch.images.data.data() +
                              (((j * options.channels + c) * kLineHeight + y) * padded);
                for (int x = 0; x < img.width; ++x) row[x] = img.at(c, y, x);
            }
        }
    }
    return batch;
}

Batch Dataset::sample_batch(const std::vector<size_t>& pool, int batch_size, RngStream& rng,
                            const BatchOptions& options) const {
    if (pool.empty()) throw ShapeError("sample_batch: empty pool");
    if (batch_size < 1) throw ShapeError("sample_batch: batch_size must be >= 1");
    std::vector<size_t> picks;
    picks.reserve(static_cast<size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) {
        picks.push_back(pool[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1))]);
    }
    return assemble_batch(picks, options, &rng);
}

}  // namespace ctca
