#pragma once

#include <string>
#include <vector>

#include "ctca/image.hpp"
#include "ctca/rng.hpp"

namespace ctca {

enum class AugKind { NoiseBlurGamma, Color, Geometry, Masking };

// Per-kind firing probability; fixed constants, not tunable per combo.
double apply_probability(AugKind kind);
char kind_letter(AugKind kind);
int max_level(AugKind kind);

struct BasicAugmentation {
    AugKind kind;
    int level;
};

struct AugmentationCombo {
    std::string name;
    std::vector<BasicAugmentation> parts;  // ordered B -> C -> G -> M
    bool has_color() const;
};

// Strict parse of names like "NONE", "B1", "B2C1G3M1": parts in B,C,G,M
// order, each at most once, levels within range. Throws RegistryError.
AugmentationCombo parse_combo(const std::string& name);

// The pre-registered combo names (the published comparison set).
const std::vector<std::string>& registered_combos();

// --- deterministic cores, exposed for tests ---
struct NoiseBlurGammaParams {
    int blur_length = 1;    // pixels; 1 = no blur
    double blur_angle = 0;  // radians
    double noise_sigma = 0;
    double gamma = 1.0;
    uint64_t noise_key = 0;  // stream key for the per-pixel noise draws
};
Image apply_noise_blur_gamma_with(const Image& img, const NoiseBlurGammaParams& p);

struct ColorParams {
    double brightness_shift = 0.0;  // additive
    double contrast = 1.0;          // about the image mean
    double saturation = 1.0;        // about per-pixel luminance
    double hue_shift = 0.0;         // in turns of the hue circle
};
Image apply_color_with(const Image& img, const ColorParams& p);

struct GeometryParams {
    // Each field varies smoothly along x: value(x) = mid + amp*sin(2*pi*x/period + phase).
    double slant_mid = 0.0, slant_amp = 0.0, slant_period = 160.0, slant_phase = 0.0;
    double hscale_mid = 1.0, hscale_amp = 0.0, hscale_period = 160.0, hscale_phase = 0.0;
    double vscale_mid = 1.0, vscale_amp = 0.0, vscale_period = 160.0, vscale_phase = 0.0;
};
Image apply_geometry_with(const Image& img, const GeometryParams& p);

struct MaskPatch {
    int x0 = 0;
    int width = 0;
    uint64_t noise_key = 0;
};
Image apply_masking_with(const Image& img, const std::vector<MaskPatch>& patches);

// --- sampled application ---
Image apply_noise_blur_gamma(const Image& img, int level, RngStream& rng);
Image apply_color(const Image& img, int level, RngStream& rng);  // promotes gray to RGB
Image apply_geometry(const Image& img, int level, RngStream& rng);
Image apply_masking(const Image& img, int level, RngStream& rng);

// Applies parts in order; each fires with its kind's probability. "NONE"
// returns the input unchanged.
Image apply_combo(const AugmentationCombo& combo, const Image& img, RngStream& rng);

}  // namespace ctca
