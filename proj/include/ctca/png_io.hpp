#pragma once

#include <string>

#include "ctca/image.hpp"

namespace ctca {

// Minimal PNG subset: 8-bit grayscale or RGB, no interlacing, filter type 0
// on every scanline, fixed zlib level, so identical pixels give identical
// bytes. The reader accepts exactly what the writer emits.
void save_png(const std::string& path, const Image8& img);
Image8 load_png(const std::string& path);

}  // namespace ctca
