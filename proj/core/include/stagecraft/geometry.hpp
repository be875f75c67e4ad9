// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>

namespace stagecraft {

struct Canvas {
    int width = 512;
    int height = 512;
    friend bool operator==(const Canvas&, const Canvas&) = default;
};

// Axis-aligned box in integer pixels, anchored at its top-left corner.
struct BoundingBox {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    long long area() const { return static_cast<long long>(w) * h; }
    int right() const { return x + w; }
    int bottom() const { return y + h; }
    double center_x() const { return x + w / 2.0; }
    double center_y() const { return y + h / 2.0; }
    bool inside(const Canvas& canvas) const {
        return w > 0 && h > 0 && x >= 0 && y >= 0 && x + w <= canvas.width && y + h <= canvas.height;
    }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

}  // namespace stagecraft
