// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stagecraft/errors.hpp"
#include "stagecraft/geometry.hpp"

namespace stagecraft {

// Dense interleaved raster: element (x, y, c) lives at ((y * width) + x) * channels + c.
template <typename T>
class Raster {
public:
    Raster() = default;
    Raster(int width, int height, int channels = 1, T fill = T{})
        : width_(width), height_(height), channels_(channels),
          values_(static_cast<std::size_t>(width) * height * channels, fill) {
        if (width < 0 || height < 0 || channels < 0) {
            throw DimensionMismatch("raster dimensions must be non-negative");
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    T& at(int x, int y, int c = 0) { return values_[index(x, y, c)]; }
    const T& at(int x, int y, int c = 0) const { return values_[index(x, y, c)]; }
    T& operator[](std::size_t i) { return values_[i]; }
    const T& operator[](std::size_t i) const { return values_[i]; }

    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }

    bool same_shape(const Raster& other) const {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<T> values_;
};

// Images hold normalized intensities in [0, 1]; masks hold 0 or 1.
using Image = Raster<double>;
using Mask = Raster<std::uint8_t>;
using LatentRaster = Raster<double>;

template <typename T>
Raster<T> resize_nearest(const Raster<T>& src, int width, int height) {
    Raster<T> out(width, height, src.channels());
    if (src.empty()) {
        return out;
    }
    for (int y = 0; y < height; ++y) {
        const int sy = static_cast<int>((static_cast<long long>(y) * src.height()) / height);
        for (int x = 0; x < width; ++x) {
            const int sx = static_cast<int>((static_cast<long long>(x) * src.width()) / width);
            for (int c = 0; c < src.channels(); ++c) {
                out.at(x, y, c) = src.at(sx, sy, c);
            }
        }
    }
    return out;
}

template <typename T>
Raster<T> crop(const Raster<T>& src, const BoundingBox& box) {
    const int x0 = std::clamp(box.x, 0, src.width());
    const int y0 = std::clamp(box.y, 0, src.height());
    const int x1 = std::clamp(box.x + box.w, x0, src.width());
    const int y1 = std::clamp(box.y + box.h, y0, src.height());
    Raster<T> out(x1 - x0, y1 - y0, src.channels());
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            for (int c = 0; c < src.channels(); ++c) {
                out.at(x - x0, y - y0, c) = src.at(x, y, c);
            }
        }
    }
    return out;
}

// Box-filter resample to an arbitrary grid; exact block means when the sizes divide.
LatentRaster area_resample(const Image& src, int width, int height);

std::size_t count_set(const Mask& mask);

}  // namespace stagecraft
