// SPDX-License-Identifier: Apache-2.0

#include "stagecraft/performance.hpp"

#include <cmath>

#include "stagecraft/errors.hpp"

namespace stagecraft {

void check_config(const GuidedRunConfig& cfg) {
    if (cfg.steps < 1) throw ConfigError("steps must be >= 1");
    if (!(cfg.ratio >= 0.0 && cfg.ratio <= 1.0)) throw ConfigError("ratio must lie in [0, 1]");
}

int substitution_threshold(const GuidedRunConfig& cfg) {
    // The small slack keeps products like 0.1 * 50 from rounding up to the next index.
    return static_cast<int>(std::ceil(cfg.ratio * cfg.steps - 1e-9));
}

LatentRaster blend_latent(const LatentRaster& z, const LatentRaster& guide, const Mask& mask, int t,
                          const GuidedRunConfig& cfg) {
    if (!z.same_shape(guide) || mask.width() != z.width() || mask.height() != z.height() || mask.channels() != 1) {
        throw DimensionMismatch("latent, guide and mask shapes must agree");
    }
    if (t < 0 || t >= cfg.steps) {
        throw StepOutOfRange("blend step outside the schedule");
    }
    if (t < substitution_threshold(cfg)) return z;
    LatentRaster out = z;
    for (int y = 0; y < z.height(); ++y) {
        for (int x = 0; x < z.width(); ++x) {
            if (!mask.at(x, y)) continue;
            for (int c = 0; c < z.channels(); ++c) out.at(x, y, c) = guide.at(x, y, c);
        }
    }
    return out;
}

Mask downsample_mask(const Mask& mask, int width, int height) {
    Mask out = resize_nearest(mask, width, height);
    for (auto& v : out.values()) v = v ? 1 : 0;
    return out;
}

LatentRaster lineart_to_latent(const Mask& lineart, int width, int height) {
    Image as_real(lineart.width(), lineart.height(), 1);
    for (std::size_t i = 0; i < lineart.size(); ++i) as_real[i] = lineart[i] ? 1.0 : 0.0;
    return area_resample(as_real, width, height);
}

Conditioning guided_conditioning(const PromptBook& book, const GuidanceBundle& bundle, const DiffusionBackend& backend) {
    Conditioning cond;
    cond.prompt = build_global_prompt(book);
    cond.negative_prompt = book.negative_prompt;
    if (!bundle.lineart.empty()) {
        const LatentRaster shape = backend.latent_template();
        cond.lineart = lineart_to_latent(bundle.lineart, shape.width(), shape.height());
    }
    return cond;
}

Image run_guided_generation(const PromptBook& book, const GuidanceBundle& bundle, const DiffusionBackend& backend,
                            const GuidedRunConfig& cfg) {
    check_config(cfg);
    if (static_cast<int>(bundle.latent_sequence.size()) != cfg.steps) {
        throw ConfigError("guidance has " + std::to_string(bundle.latent_sequence.size()) + " latents for " +
                          std::to_string(cfg.steps) + " steps");
    }
    const LatentRaster shape = backend.latent_template();
    const Mask mask = bundle.union_mask.empty() ? Mask(shape.width(), shape.height(), 1, 0)
                                                : downsample_mask(bundle.union_mask, shape.width(), shape.height());
    const Conditioning cond = guided_conditioning(book, bundle, backend);
    return backend.generate(cond, cfg.steps, cfg.seed, [&](int t, LatentRaster& z) {
        z = blend_latent(z, bundle.latent_sequence[static_cast<std::size_t>(t)], mask, t, cfg);
    });
}

}  // namespace stagecraft
