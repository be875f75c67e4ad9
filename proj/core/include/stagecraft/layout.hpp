// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stagecraft/geometry.hpp"

namespace stagecraft {

// Intersection area over the smaller box's area.
double overlap_fraction(const BoundingBox& a, const BoundingBox& b);

double max_pairwise_overlap(std::span<const BoundingBox> boxes);

BoundingBox collective_rect(std::span<const BoundingBox> boxes);

BoundingBox clamp_to_canvas(const BoundingBox& box, const Canvas& canvas);

struct DispersionResult {
    std::vector<BoundingBox> boxes;
    bool converged = false;
    int iters_used = 0;
};

struct DispersionParams {
    double threshold = 0.25;
    int max_iters = 10;
    double base_step = 0.05;    // fraction of the canvas diagonal
    double jitter_step = 0.025; // extra uniform fraction of the diagonal
};

// On failure the clamped input positions are returned with converged = false.
DispersionResult disperse(std::span<const BoundingBox> boxes, const Canvas& canvas, std::uint64_t rng_seed,
                          const DispersionParams& params = {});

}  // namespace stagecraft
