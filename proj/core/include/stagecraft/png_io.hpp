// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "stagecraft/raster.hpp"

namespace stagecraft {

using Bytes = std::vector<std::uint8_t>;

// 8-bit PNG with 1 or 3 channels; values are rounded to the nearest 1/255 step.
Bytes encode_png(const Image& image);
Image decode_png(std::span<const std::uint8_t> bytes);

// Rounds every value to the 8-bit grid so a PNG round trip is lossless.
Image quantize8(const Image& image);

Bytes read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace stagecraft
