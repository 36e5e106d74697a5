#include "cplab/png.hpp"

#include <zlib.h>

#include <fstream>

#include "cplab/errors.hpp"

namespace cplab {

Image::Image(int64_t w_, int64_t h_, uint8_t r, uint8_t g, uint8_t b) : w(w_), h(h_) {
    if (w < 1 || h < 1) throw InvalidInputError("image dimensions must be positive");
    rgb.resize(static_cast<size_t>(w * h * 3));
    for (size_t i = 0; i < rgb.size(); i += 3) {
        rgb[i] = r;
        rgb[i + 1] = g;
        rgb[i + 2] = b;
    }
}

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void put_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& data) {
    put_u32(out, static_cast<uint32_t>(data.size()));
    const size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const auto crc =
        crc32(0, out.data() + start, static_cast<uInt>(out.size() - start));
    put_u32(out, static_cast<uint32_t>(crc));
}

}  // namespace

std::vector<uint8_t> encode_png(const Image& img) {
    if (img.w < 1 || img.h < 1 ||
        static_cast<int64_t>(img.rgb.size()) != img.w * img.h * 3)
        throw InvalidInputError("encode_png: image payload does not match its dimensions");

    // Raw scanlines, each prefixed with filter type 0 (None).
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(img.h * (1 + img.w * 3)));
    for (int64_t y = 0; y < img.h; ++y) {
        raw.push_back(0);
        const auto* row = img.rgb.data() + y * img.w * 3;
        raw.insert(raw.end(), row, row + img.w * 3);
    }

    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> zdata(zlen);
    if (compress2(zdata.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw IoError("encode_png: zlib compression failed");
    zdata.resize(zlen);

    std::vector<uint8_t> ihdr;
    put_u32(ihdr, static_cast<uint32_t>(img.w));
    put_u32(ihdr, static_cast<uint32_t>(img.h));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace

    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", zdata);
    put_chunk(out, "IEND", {});
    return out;
}

void write_png(const std::string& path, const Image& img) {
    const auto bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace cplab
