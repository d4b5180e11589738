#include "ctca/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <vector>

namespace ctca {

namespace {

constexpr uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

uint32_t read_u32(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const std::vector<uint8_t>& payload) {
    put_u32(out, static_cast<uint32_t>(payload.size()));
    const size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const uint32_t crc = static_cast<uint32_t>(
        crc32(0, out.data() + start, static_cast<uInt>(out.size() - start)));
    put_u32(out, crc);
}

}  // namespace

void save_png(const std::string& path, const Image8& img) {
    if ((img.channels != 1 && img.channels != 3) || img.height < 1 || img.width < 1 ||
        img.data.size() != static_cast<size_t>(img.channels) * img.height * img.width) {
        throw IoError("save_png: malformed image for " + path);
    }
    const size_t ps = static_cast<size_t>(img.height) * img.width;
    // Scanlines: filter byte 0 then interleaved samples.
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(img.height) * (1 + static_cast<size_t>(img.width) * img.channels));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                raw.push_back(img.data[static_cast<size_t>(c) * ps +
                                       static_cast<size_t>(y) * img.width + x]);
            }
        }
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) !=
        Z_OK) {
        throw IoError("save_png: deflate failed for " + path);
    }
    compressed.resize(bound);

    std::vector<uint8_t> ihdr;
    put_u32(ihdr, static_cast<uint32_t>(img.width));
    put_u32(ihdr, static_cast<uint32_t>(img.height));
    ihdr.push_back(8);                                  // bit depth
    ihdr.push_back(img.channels == 1 ? 0 : 2);          // color type
    ihdr.push_back(0);                                  // compression
    ihdr.push_back(0);                                  // filter method
    ihdr.push_back(0);                                  // no interlace

    std::vector<uint8_t> file(kSignature, kSignature + 8);
    append_chunk(file, "IHDR", ihdr);
    append_chunk(file, "IDAT", compressed);
    append_chunk(file, "IEND", {});

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("save_png: cannot open " + path);
    out.write(reinterpret_cast<const char*>(file.data()),
              static_cast<std::streamsize>(file.size()));
    if (!out) throw IoError("save_png: short write to " + path);
}

Image8 load_png(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_png: cannot open " + path);
    std::vector<uint8_t> file((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
    if (file.size() < 8 || std::memcmp(file.data(), kSignature, 8) != 0) {
        throw IoError("load_png: not a PNG file: " + path);
    }
    Image8 img;
    bool have_header = false;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    while (pos + 12 <= file.size()) {
        const uint32_t len = read_u32(file.data() + pos);
        if (pos + 12 + len > file.size()) throw IoError("load_png: truncated chunk in " + path);
        const char* type = reinterpret_cast<const char*>(file.data() + pos + 4);
        const uint8_t* payload = file.data() + pos + 8;
        const uint32_t stored_crc = read_u32(file.data() + pos + 8 + len);
        const uint32_t actual_crc = static_cast<uint32_t>(
            crc32(0, file.data() + pos + 4, static_cast<uInt>(4 + len)));
        if (stored_crc != actual_crc) throw IoError("load_png: CRC mismatch in " + path);
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw IoError("load_png: bad IHDR in " + path);
            img.width = static_cast<int>(read_u32(payload));
            img.height = static_cast<int>(read_u32(payload + 4));
            const uint8_t depth = payload[8], color = payload[9], interlace = payload[12];
            if (depth != 8 || (color != 0 && color != 2) || interlace != 0) {
                throw IoError("load_png: unsupported format in " + path +
                              " (need 8-bit gray or RGB, no interlace)");
            }
            img.channels = color == 0 ? 1 : 3;
            have_header = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (!have_header || idat.empty()) throw IoError("load_png: missing chunks in " + path);

    const size_t stride = static_cast<size_t>(img.width) * img.channels;
    const size_t raw_size = static_cast<size_t>(img.height) * (stride + 1);
    std::vector<uint8_t> raw(raw_size);
    uLongf out_len = static_cast<uLongf>(raw_size);
    if (uncompress(raw.data(), &out_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        out_len != raw_size) {
        throw IoError("load_png: inflate failed for " + path);
    }
    const size_t ps = static_cast<size_t>(img.height) * img.width;
    img.data.resize(ps * img.channels);
    for (int y = 0; y < img.height; ++y) {
        const uint8_t* line = raw.data() + static_cast<size_t>(y) * (stride + 1);
        if (line[0] != 0) {
            throw IoError("load_png: unsupported scanline filter in " + path);
        }
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                img.data[static_cast<size_t>(c) * ps + static_cast<size_t>(y) * img.width + x] =
                    line[1 + static_cast<size_t>(x) * img.channels + c];
            }
        }
    }
    return img;
}

}  // namespace ctca
