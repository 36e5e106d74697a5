#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cplab {

// Plain 8-bit RGB raster, row-major.
struct Image {
    int64_t w = 0, h = 0;
    std::vector<uint8_t> rgb;  // 3 bytes per pixel

    Image() = default;
    Image(int64_t w_, int64_t h_, uint8_t r = 255, uint8_t g = 255, uint8_t b = 255);

    bool inside(int64_t x, int64_t y) const { return x >= 0 && x < w && y >= 0 && y < h; }

    // Out-of-frame writes are dropped so drawing code can clip for free.
    void set(int64_t x, int64_t y, uint8_t r, uint8_t g, uint8_t b) {
        if (!inside(x, y)) return;
        const auto i = static_cast<size_t>((y * w + x) * 3);
        rgb[i] = r;
        rgb[i + 1] = g;
        rgb[i + 2] = b;
    }
};

// PNG encoding: 8-bit RGB, filter 0 on every row, one zlib-compressed IDAT.
std::vector<uint8_t> encode_png(const Image& img);
void write_png(const std::string& path, const Image& img);

}  // namespace cplab
