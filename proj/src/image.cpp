#include "ctca/image.hpp"

#include <algorithm>
#include <cmath>

#include "ctca/rng.hpp"

namespace ctca {

Image::Image(int channels_in, int height_in, int width_in, double fill)
    : channels(channels_in), height(height_in), width(width_in) {
    if ((channels != 1 && channels != 3) || height < 1 || width < 1) {
        throw ShapeError("Image: invalid dimensions (" + std::to_string(channels_in) + "," +
                         std::to_string(height_in) + "," + std::to_string(width_in) + ")");
    }
    data.assign(static_cast<size_t>(channels) * height * width, fill);
}

Image to_gray(const Image& img) {
    if (img.channels == 1) return img;
    Image out(1, img.height, img.width);
    const size_t ps = img.plane_size();
    for (size_t i = 0; i < ps; ++i) {
        out.data[i] = (img.data[i] + img.data[ps + i] + img.data[2 * ps + i]) / 3.0;
    }
    return out;
}

Image to_rgb(const Image& img) {
    if (img.channels == 3) return img;
    Image out(3, img.height, img.width);
    const size_t ps = img.plane_size();
    for (size_t i = 0; i < ps; ++i) {
        out.data[i] = img.data[i];
        out.data[ps + i] = img.data[i];
        out.data[2 * ps + i] = img.data[i];
    }
    return out;
}

void clamp01(Image& img) {
    for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
}

Image8 quantize(const Image& img) {
    Image8 out;
    out.channels = img.channels;
    out.height = img.height;
    out.width = img.width;
    out.data.resize(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) {
        const double v = std::clamp(img.data[i], 0.0, 1.0);
        out.data[i] = static_cast<uint8_t>(std::lround(v * 255.0));
    }
    return out;
}

Image dequantize(const Image8& img) {
    Image out(img.channels, img.height, img.width);
    for (size_t i = 0; i < img.data.size(); ++i) {
        out.data[i] = static_cast<double>(img.data[i]) / 255.0;
    }
    return out;
}

double sample_bilinear(const Image& img, int c, double y, double x) {
    const double yc = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    const double xc = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    const int y0 = static_cast<int>(std::floor(yc));
    const int x0 = static_cast<int>(std::floor(xc));
    const int y1 = std::min(y0 + 1, img.height - 1);
    const int x1 = std::min(x0 + 1, img.width - 1);
    const double fy = yc - y0;
    const double fx = xc - x0;
    const double a = img.at(c, y0, x0) * (1.0 - fx) + img.at(c, y0, x1) * fx;
    const double b = img.at(c, y1, x0) * (1.0 - fx) + img.at(c, y1, x1) * fx;
    return a * (1.0 - fy) + b * fy;
}

uint64_t image_hash(const Image& img) {
    const Image8 q = quantize(img);
    const int32_t header[3] = {q.channels, q.height, q.width};
    uint64_t h = fnv1a64(header, sizeof(header));
    return fnv1a64(q.data.data(), q.data.size(), h);
}

}  // namespace ctca
