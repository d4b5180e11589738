#include "ctca/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ctca {

double apply_probability(AugKind kind) {
    switch (kind) {
        case AugKind::NoiseBlurGamma: return 0.2;
        case AugKind::Color: return 0.333;
        case AugKind::Geometry: return 0.66;
        case AugKind::Masking: return 0.5;
    }
    throw RegistryError("unknown augmentation kind");
}

char kind_letter(AugKind kind) {
    switch (kind) {
        case AugKind::NoiseBlurGamma: return 'B';
        case AugKind::Color: return 'C';
        case AugKind::Geometry: return 'G';
        case AugKind::Masking: return 'M';
    }
    throw RegistryError("unknown augmentation kind");
}

int max_level(AugKind kind) {
    return kind == AugKind::Geometry ? 3 : 2;
}

bool AugmentationCombo::has_color() const {
    return std::any_of(parts.begin(), parts.end(),
                       [](const BasicAugmentation& p) { return p.kind == AugKind::Color; });
}

AugmentationCombo parse_combo(const std::string& name) {
    AugmentationCombo combo;
    combo.name = name;
    if (name == "NONE") return combo;
    static constexpr AugKind order[4] = {AugKind::NoiseBlurGamma, AugKind::Color,
                                         AugKind::Geometry, AugKind::Masking};
    size_t pos = 0;
    int next_kind = 0;
    while (pos < name.size()) {
        if (pos + 1 >= name.size()) {
            throw RegistryError("combo '" + name + "': dangling letter at position " +
                                std::to_string(pos));
        }
        const char letter = name[pos];
        const char digit = name[pos + 1];
        int ki = next_kind;
        while (ki < 4 && kind_letter(order[ki]) != letter) ++ki;
        if (ki == 4) {
            throw RegistryError("combo '" + name + "': unexpected part letter '" +
                                std::string(1, letter) + "' (parts must appear in B,C,G,M order)");
        }
        if (digit < '1' || digit > '0' + max_level(order[ki])) {
            throw RegistryError("combo '" + name + "': level '" + std::string(1, digit) +
                                "' out of range for part " + std::string(1, letter));
        }
        combo.parts.push_back({order[ki], digit - '0'});
        next_kind = ki + 1;
        pos += 2;
    }
    if (combo.parts.empty()) throw RegistryError("combo '" + name + "': no parts");
    return combo;
}

const std::vector<std::string>& registered_combos() {
    static const std::vector<std::string> names = {
        "NONE",     "B1",       "B1C1",     "B1G1",     "B1C1G1",   "B1C1G1M1", "B2C1G1M1",
        "B2C2G1M1", "B2C1G2M1", "B2C1G3M1", "B2C2G2M1", "B2C2G3M1", "B2C2G2M2", "B2C2G3M2"};
    return names;
}

Image apply_noise_blur_gamma_with(const Image& img, const NoiseBlurGammaParams& p) {
    Image out = img;
    if (p.blur_length > 1) {
        const double dx = std::cos(p.blur_angle);
        const double dy = std::sin(p.blur_angle);
        const double half = (p.blur_length - 1) / 2.0;
        const double inv = 1.0 / p.blur_length;
        for (int c = 0; c < img.channels; ++c) {
            for (int y = 0; y < img.height; ++y) {
                for (int x = 0; x < img.width; ++x) {
                    double acc = 0.0;
                    for (int i = 0; i < p.blur_length; ++i) {
                        const double off = i - half;
                        acc += sample_bilinear(img, c, y + off * dy, x + off * dx);
                    }
                    out.at(c, y, x) = acc * inv;
                }
            }
        }
    }
    if (p.noise_sigma > 0.0) {
        RngStream noise(p.noise_key);
        for (double& v : out.data) v += noise.gauss(0.0, p.noise_sigma);
    }
    if (p.gamma != 1.0) {
        for (double& v : out.data) v = std::pow(std::clamp(v, 0.0, 1.0), p.gamma);
    }
    clamp01(out);
    return out;
}

namespace {

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = mx - mn;
    v = mx;
    s = mx == 0.0 ? 0.0 : d / mx;
    if (d == 0.0) {
        h = 0.0;
    } else if (mx == r) {
        h = ((g - b) / d) / 6.0;
    } else if (mx == g) {
        h = (2.0 + (b - r) / d) / 6.0;
    } else {
        h = (4.0 + (r - g) / d) / 6.0;
    }
    if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    const double hh = (h - std::floor(h)) * 6.0;
    const int sector = static_cast<int>(hh) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    switch (sector) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

double luminance(double r, double g, double b) {
    return 0.299 * r + 0.587 * g + 0.114 * b;
}

}  // namespace

Image apply_color_with(const Image& img, const ColorParams& p) {
    Image out = to_rgb(img);
    const size_t ps = out.plane_size();
    if (p.brightness_shift != 0.0) {
        for (double& v : out.data) v += p.brightness_shift;
    }
    if (p.contrast != 1.0) {
        double mean = 0.0;
        for (size_t i = 0; i < ps; ++i) {
            mean += luminance(out.data[i], out.data[ps + i], out.data[2 * ps + i]);
        }
        mean /= static_cast<double>(ps);
        for (double& v : out.data) v = mean + (v - mean) * p.contrast;
    }
    if (p.saturation != 1.0) {
        for (size_t i = 0; i < ps; ++i) {
            const double lum = luminance(out.data[i], out.data[ps + i], out.data[2 * ps + i]);
            out.data[i] = lum + (out.data[i] - lum) * p.saturation;
            out.data[ps + i] = lum + (out.data[ps + i] - lum) * p.saturation;
            out.data[2 * ps + i] = lum + (out.data[2 * ps + i] - lum) * p.saturation;
        }
    }
    if (p.hue_shift != 0.0) {
        for (size_t i = 0; i < ps; ++i) {
            double h, s, v;
            rgb_to_hsv(std::clamp(out.data[i], 0.0, 1.0),
                       std::clamp(out.data[ps + i], 0.0, 1.0),
                       std::clamp(out.data[2 * ps + i], 0.0, 1.0), h, s, v);
            hsv_to_rgb(h + p.hue_shift, s, v, out.data[i], out.data[ps + i],
                       out.data[2 * ps + i]);
        }
    }
    clamp01(out);
    return out;
}

Image apply_geometry_with(const Image& img, const GeometryParams& p) {
    const int h = img.height, w = img.width;
    auto field = [](double mid, double amp, double period, double phase, double x) {
        return mid + amp * std::sin(2.0 * std::numbers::pi * x / period + phase);
    };
    // Horizontal positions: integrate inverse horizontal scale, then
    // renormalize so the warp spans the original width exactly.
    std::vector<double> cum(static_cast<size_t>(w));
    cum[0] = 0.0;
    double prev_inv = 1.0 / field(p.hscale_mid, p.hscale_amp, p.hscale_period, p.hscale_phase, 0);
    for (int x = 1; x < w; ++x) {
        const double inv =
            1.0 / field(p.hscale_mid, p.hscale_amp, p.hscale_period, p.hscale_phase, x);
        cum[static_cast<size_t>(x)] = cum[static_cast<size_t>(x - 1)] + 0.5 * (prev_inv + inv);
        prev_inv = inv;
    }
    const double span = cum[static_cast<size_t>(w - 1)];
    const double norm = span > 0.0 ? static_cast<double>(w - 1) / span : 1.0;
    const double yc = (h - 1) / 2.0;
    Image out(img.channels, h, w);
    for (int x = 0; x < w; ++x) {
        const double base_x = cum[static_cast<size_t>(x)] * norm;
        const double slant = field(p.slant_mid, p.slant_amp, p.slant_period, p.slant_phase, x);
        const double vs = field(p.vscale_mid, p.vscale_amp, p.vscale_period, p.vscale_phase, x);
        for (int y = 0; y < h; ++y) {
            const double off = y - yc;
            const double sy = yc + off / vs;
            const double sx = base_x + slant * off;
            for (int c = 0; c < img.channels; ++c) {
                out.at(c, y, x) = sample_bilinear(img, c, sy, sx);
            }
        }
    }
    return out;
}

Image apply_masking_with(const Image& img, const std::vector<MaskPatch>& patches) {
    Image out = img;
    for (const MaskPatch& patch : patches) {
        if (patch.x0 < 0 || patch.width < 1 || patch.x0 + patch.width > img.width) {
            throw ShapeError("apply_masking_with: patch [" + std::to_string(patch.x0) + "," +
                             std::to_string(patch.x0 + patch.width) + ") outside image width " +
                             std::to_string(img.width));
        }
        RngStream noise(patch.noise_key);
        for (int c = 0; c < out.channels; ++c) {
            for (int y = 0; y < out.height; ++y) {
                for (int x = patch.x0; x < patch.x0 + patch.width; ++x) {
                    out.at(c, y, x) = noise.uniform();
                }
            }
        }
    }
    return out;
}

Image apply_noise_blur_gamma(const Image& img, int level, RngStream& rng) {
    if (level < 1 || level > 2) throw RegistryError("NoiseBlurGamma level must be 1 or 2");
    NoiseBlurGammaParams p;
    p.blur_length = static_cast<int>(rng.uniform_int(1, level == 1 ? 3 : 7));
    p.blur_angle = rng.uniform(0.0, std::numbers::pi);
    p.noise_sigma = rng.uniform(0.0, (level == 1 ? 8.0 : 16.0) / 255.0);
    p.gamma = level == 1 ? rng.uniform(0.66, 1.5) : rng.uniform(0.4, 2.5);
    p.noise_key = rng.next_u64();
    return apply_noise_blur_gamma_with(img, p);
}

Image apply_color(const Image& img, int level, RngStream& rng) {
    if (level < 1 || level > 2) throw RegistryError("Color level must be 1 or 2");
    const double r = level == 1 ? 0.15 : 0.30;
    const double rh = level == 1 ? 0.05 : 0.10;
    ColorParams p;
    p.brightness_shift = rng.uniform(-r, r);
    p.contrast = 1.0 + rng.uniform(-r, r);
    p.saturation = 1.0 + rng.uniform(-r, r);
    p.hue_shift = rng.uniform(-rh, rh);
    return apply_color_with(img, p);
}

Image apply_geometry(const Image& img, int level, RngStream& rng) {
    if (level < 1 || level > 3) throw RegistryError("Geometry level must be 1, 2, or 3");
    const double smax = level == 1 ? 0.15 : level == 2 ? 0.30 : 0.45;
    const double lo = level == 1 ? 0.9 : level == 2 ? 0.8 : 0.7;
    const double hi = level == 1 ? 1.1 : level == 2 ? 1.25 : 1.4;
    GeometryParams p;
    auto smooth_field = [&rng, &img](double range_lo, double range_hi, double& mid, double& amp,
                                     double& period, double& phase) {
        const double a = rng.uniform(range_lo, range_hi);
        const double b = rng.uniform(range_lo, range_hi);
        mid = (a + b) / 2.0;
        amp = std::abs(b - a) / 2.0;
        // Spatial period at least 4x the line height keeps the warp smooth.
        period = rng.uniform(4.0 * img.height, 8.0 * img.height);
        phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    };
    smooth_field(-smax, smax, p.slant_mid, p.slant_amp, p.slant_period, p.slant_phase);
    smooth_field(lo, hi, p.hscale_mid, p.hscale_amp, p.hscale_period, p.hscale_phase);
    smooth_field(lo, hi, p.vscale_mid, p.vscale_amp, p.vscale_period, p.vscale_phase);
    return apply_geometry_with(img, p);
}

Image apply_masking(const Image& img, int level, RngStream& rng) {
    if (level < 1 || level > 2) throw RegistryError("Masking level must be 1 or 2");
    const int base = std::max(1, img.width / (8 * img.height));
    const int cmax = level == 1 ? base : 2 * base;
    const int wmax = std::min(img.width, (level == 1 ? 2 : 3) * img.height);
    const int count = static_cast<int>(rng.uniform_int(1, cmax));
    std::vector<MaskPatch> patches;
    patches.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        MaskPatch patch;
        patch.width = static_cast<int>(rng.uniform_int(1, wmax));
        patch.x0 = static_cast<int>(rng.uniform_int(0, img.width - patch.width));
        patch.noise_key = rng.next_u64();
        patches.push_back(patch);
    }
    return apply_masking_with(img, patches);
}

Image apply_combo(const AugmentationCombo& combo, const Image& img, RngStream& rng) {
    Image out = img;
    for (const BasicAugmentation& part : combo.parts) {
        const bool fire = rng.uniform() < apply_probability(part.kind);
        if (!fire) continue;
        switch (part.kind) {
            case AugKind::NoiseBlurGamma: out = apply_noise_blur_gamma(out, part.level, rng); break;
            case AugKind::Color: out = apply_color(out, part.level, rng); break;
            case AugKind::Geometry: out = apply_geometry(out, part.level, rng); break;
            case AugKind::Masking: out = apply_masking(out, part.level, rng); break;
        }
    }
    return out;
}

}  // namespace ctca
