// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "stagecraft/backends.hpp"
#include "stagecraft/promptbook.hpp"
#include "stagecraft/rehearsal.hpp"

namespace stagecraft {

struct GuidedRunConfig {
    int steps = 50;
    double ratio = 0.1;
    std::uint64_t seed = 0;
    Canvas canvas;
};

void check_config(const GuidedRunConfig& cfg);

// Step indices run from steps-1 (pure noise) down to 0. Substitution happens at every
// index t >= ratio * steps, which leaves the final ceil(ratio * steps) indices free.
int substitution_threshold(const GuidedRunConfig& cfg);

LatentRaster blend_latent(const LatentRaster& z, const LatentRaster& guide, const Mask& mask, int t,
                          const GuidedRunConfig& cfg);

Mask downsample_mask(const Mask& mask, int width, int height);

// Per-cell edge density of a canvas-resolution edge map.
LatentRaster lineart_to_latent(const Mask& lineart, int width, int height);

Conditioning guided_conditioning(const PromptBook& book, const GuidanceBundle& bundle, const DiffusionBackend& backend);

Image run_guided_generation(const PromptBook& book, const GuidanceBundle& bundle, const DiffusionBackend& backend,
                            const GuidedRunConfig& cfg);

}  // namespace stagecraft
