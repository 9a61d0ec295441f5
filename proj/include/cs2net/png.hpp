#ifndef CS2NET_PNG_HPP
#define CS2NET_PNG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cs2net/metrics.hpp"

namespace cs2net {

// Minimal 8-bit grayscale PNG writer (zlib-compressed, filter 0).
void write_png_gray(const std::string& path, const std::vector<std::uint8_t>& pixels, int height,
                    int width);

// Simple raster plot of a ROC curve on a square canvas with the diagonal.
void render_roc_png(const RocCurve& roc, const std::string& path, int size = 512);

}  // namespace cs2net

#endif
