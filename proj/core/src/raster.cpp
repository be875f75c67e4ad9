// SPDX-License-Identifier: Apache-2.0

#include "stagecraft/raster.hpp"

#include <algorithm>

namespace stagecraft {

LatentRaster area_resample(const Image& src, int width, int height) {
    LatentRaster out(width, height, src.channels());
    if (src.empty() || width == 0 || height == 0) {
        return out;
    }
    if (src.width() % width == 0 && src.height() % height == 0) {
        const int fx = src.width() / width;
        const int fy = src.height() / height;
        const double inv = 1.0 / (fx * fy);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                for (int c = 0; c < src.channels(); ++c) {
                    double sum = 0.0;
                    for (int dy = 0; dy < fy; ++dy) {
                        for (int dx = 0; dx < fx; ++dx) {
                            sum += src.at(x * fx + dx, y * fy + dy, c);
                        }
                    }
                    out.at(x, y, c) = sum * inv;
                }
            }
        }
        return out;
    }
    // General case: weight each source pixel by its overlap with the target cell.
    const double sx = static_cast<double>(src.width()) / width;
    const double sy = static_cast<double>(src.height()) / height;
    for (int y = 0; y < height; ++y) {
        const double y0 = y * sy;
        const double y1 = (y + 1) * sy;
        for (int x = 0; x < width; ++x) {
            const double x0 = x * sx;
            const double x1 = (x + 1) * sx;
            for (int c = 0; c < src.channels(); ++c) {
                double sum = 0.0;
                double weight = 0.0;
                for (int py = static_cast<int>(y0); py < std::min(src.height(), static_cast<int>(y1 + 1.0)); ++py) {
                    const double wy = std::min<double>(py + 1, y1) - std::max<double>(py, y0);
                    if (wy <= 0) continue;
                    for (int px = static_cast<int>(x0); px < std::min(src.width(), static_cast<int>(x1 + 1.0)); ++px) {
                        const double wx = std::min<double>(px + 1, x1) - std::max<double>(px, x0);
                        if (wx <= 0) continue;
                        sum += wx * wy * src.at(px, py, c);
                        weight += wx * wy;
                    }
                }
                out.at(x, y, c) = weight > 0 ? sum / weight : 0.0;
            }
        }
    }
    return out;
}

std::size_t count_set(const Mask& mask) {
    return static_cast<std::size_t>(std::count_if(mask.values().begin(), mask.values().end(),
                                                  [](std::uint8_t v) { return v != 0; }));
}

}  // namespace stagecraft
