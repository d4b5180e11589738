#pragma once

#include <cstdint>
#include <vector>

#include "ctca/common.hpp"

namespace ctca {

// Planar float image, values in [0,1], layout [C][H][W]. Channels are 1
// (grayscale) or 3 (RGB).
struct Image {
    int channels = 1;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Image() = default;
    Image(int channels_in, int height_in, int width_in, double fill = 0.0);

    double& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    size_t plane_size() const { return static_cast<size_t>(height) * width; }
};

// 8-bit companion used for files and golden hashes.
struct Image8 {
    int channels = 1;
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data;  // same planar layout
};

Image to_gray(const Image& img);  // RGB -> mean of channels; gray passes through
Image to_rgb(const Image& img);   // gray -> replicated channels; RGB passes through
void clamp01(Image& img);

Image8 quantize(const Image& img);    // round to nearest of 255 steps
Image dequantize(const Image8& img);  // /255

// Bilinear sample of one channel plane with edge replication.
double sample_bilinear(const Image& img, int c, double y, double x);

// FNV-1a over the quantized pixel bytes plus the header fields; the golden
// image fingerprint used by tests.
uint64_t image_hash(const Image& img);

}  // namespace ctca
