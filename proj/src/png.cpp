#include "cs2net/png.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace cs2net {

namespace {

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void write_chunk(std::ofstream& f, const char type[4], const std::vector<std::uint8_t>& data) {
    std::vector<std::uint8_t> head;
    write_be32(head, static_cast<std::uint32_t>(data.size()));
    f.write(reinterpret_cast<const char*>(head.data()), 4);
    f.write(type, 4);
    if (!data.empty()) f.write(reinterpret_cast<const char*>(data.data()),
                               static_cast<std::streamsize>(data.size()));
    std::uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
    std::vector<std::uint8_t> tail;
    write_be32(tail, crc);
    f.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace

void write_png_gray(const std::string& path, const std::vector<std::uint8_t>& pixels, int height,
                    int width) {
    if (pixels.size() != static_cast<size_t>(height) * static_cast<size_t>(width))
        throw DimensionError("write_png_gray: size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open " + path + " for writing");
    static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    f.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<std::uint8_t> ihdr;
    write_be32(ihdr, static_cast<std::uint32_t>(width));
    write_be32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);  // deflate
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace
    write_chunk(f, "IHDR", ihdr);

    // one filter byte (0) per scanline
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<size_t>(height) * (static_cast<size_t>(width) + 1));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), pixels.begin() + static_cast<size_t>(y) * width,
                   pixels.begin() + static_cast<size_t>(y + 1) * width);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw NumericError("write_png_gray: zlib compression failed");
    compressed.resize(bound);
    write_chunk(f, "IDAT", compressed);
    write_chunk(f, "IEND", {});
}

void render_roc_png(const RocCurve& roc, const std::string& path, int size) {
    std::vector<std::uint8_t> canvas(static_cast<size_t>(size) * static_cast<size_t>(size), 255);
    auto put = [&](int y, int x, std::uint8_t v) {
        if (y >= 0 && y < size && x >= 0 && x < size)
            canvas[static_cast<size_t>(y) * size + x] = v;
    };
    // light diagonal for reference
    for (int i = 0; i < size; ++i) put(size - 1 - i, i, 200);
    // piecewise-linear curve between ROC points
    for (size_t k = 1; k < roc.points.size(); ++k) {
        double x0 = roc.points[k - 1].fpr, y0 = roc.points[k - 1].tpr;
        double x1 = roc.points[k].fpr, y1 = roc.points[k].tpr;
        int steps = std::max(2, size);
        for (int i = 0; i <= steps; ++i) {
            double t = static_cast<double>(i) / steps;
            double x = x0 + t * (x1 - x0), y = y0 + t * (y1 - y0);
            put(size - 1 - static_cast<int>(std::lround(y * (size - 1))),
                static_cast<int>(std::lround(x * (size - 1))), 0);
        }
    }
    write_png_gray(path, canvas, size, size);
}

}  // namespace cs2net
