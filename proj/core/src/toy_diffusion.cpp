// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "stagecraft/backends.hpp"
#include "stagecraft/errors.hpp"
#include "stagecraft/hashing.hpp"
#include "stagecraft/png_io.hpp"
#include "text_util.hpp"

namespace stagecraft {

std::string normalize_prompt(std::string_view prompt) {
    return detail::lower(detail::collapse_whitespace(prompt));
}

LatentRaster prompt_target(std::string_view prompt, int width, int height, int channels, std::uint64_t seed,
                           int tiles, double scale) {
    const std::uint64_t key = fnv1a64(normalize_prompt(prompt)) ^ mix64(seed);
    std::vector<double> tile_values(static_cast<std::size_t>(channels) * tiles * tiles);
    for (int c = 0; c < channels; ++c) {
        for (int i = 0; i < tiles * tiles; ++i) {
            tile_values[static_cast<std::size_t>(c) * tiles * tiles + i] = scale * counter_normal(key, c, i);
        }
    }
    LatentRaster out(width, height, channels);
    for (int y = 0; y < height; ++y) {
        const int ty = y * tiles / height;
        for (int x = 0; x < width; ++x) {
            const int tx = x * tiles / width;
            for (int c = 0; c < channels; ++c) {
                out.at(x, y, c) = tile_values[(static_cast<std::size_t>(c) * tiles + ty) * tiles + tx];
            }
        }
    }
    return out;
}

ToyDiffusionBackend::ToyDiffusionBackend(ToyDiffusionParams params) : params_(params) {
    if (params_.latent_factor < 1 || params_.canvas.width % params_.latent_factor != 0 ||
        params_.canvas.height % params_.latent_factor != 0) {
        throw ConfigError("canvas must be a multiple of the latent factor");
    }
    if (params_.channels < 1 || params_.pattern_tiles < 1) {
        throw ConfigError("toy backend needs positive channel and tile counts");
    }
    if (!(params_.denoise_rate > 0.0 && params_.denoise_rate < 1.0)) {
        throw ConfigError("denoise rate must lie in (0, 1)");
    }
    if (params_.adapter_scale < 0.0 || params_.adapter_scale > 1.0) {
        throw ConfigError("adapter scale must lie in [0, 1]");
    }
}

LatentRaster ToyDiffusionBackend::latent_template() const {
    return LatentRaster(latent_width(), latent_height(), params_.channels);
}

LatentRaster ToyDiffusionBackend::encode(const Image& image) const {
    if (image.channels() != params_.channels) {
        throw DimensionMismatch("image has " + std::to_string(image.channels()) + " channels, backend expects " +
                                std::to_string(params_.channels));
    }
    LatentRaster z = area_resample(image, latent_width(), latent_height());
    for (double& v : z.values()) v = (v - 0.5) * 4.0;
    return z;
}

Image ToyDiffusionBackend::decode(const LatentRaster& latent) const {
    if (latent.width() != latent_width() || latent.height() != latent_height() || latent.channels() != params_.channels) {
        throw DimensionMismatch("latent shape does not match the backend grid");
    }
    const int f = params_.latent_factor;
    Image out(params_.canvas.width, params_.canvas.height, params_.channels);
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            for (int c = 0; c < params_.channels; ++c) {
                out.at(x, y, c) = std::clamp(0.5 + latent.at(x / f, y / f, c) / 4.0, 0.0, 1.0);
            }
        }
    }
    return quantize8(out);
}

LatentRaster ToyDiffusionBackend::target(std::string_view prompt) const {
    return prompt_target(prompt, latent_width(), latent_height(), params_.channels, params_.pattern_seed,
                         params_.pattern_tiles, params_.pattern_scale);
}

LatentRaster ToyDiffusionBackend::conditioned_target(const Conditioning& cond) const {
    LatentRaster base = target(cond.prompt);
    if (cond.adapter_reference) {
        const LatentRaster ref = encode(*cond.adapter_reference);
        const double s = params_.adapter_scale;
        for (std::size_t i = 0; i < base.size(); ++i) base[i] = (1.0 - s) * base[i] + s * ref[i];
    }
    if (!detail::trim(cond.negative_prompt).empty()) {
        const LatentRaster neg = target(cond.negative_prompt);
        for (std::size_t i = 0; i < base.size(); ++i) base[i] -= params_.negative_weight * neg[i];
    }
    return base;
}

LatentRaster ToyDiffusionBackend::toy_update(const LatentRaster& z, const LatentRaster& target,
                                             const LatentRaster* lineart, double rate, double pull) {
    if (!z.same_shape(target)) {
        throw DimensionMismatch("latent and target shapes differ");
    }
    LatentRaster out(z.width(), z.height(), z.channels());
    for (int y = 0; y < z.height(); ++y) {
        for (int x = 0; x < z.width(); ++x) {
            const double edge = lineart ? lineart->at(x, y) : 0.0;
            for (int c = 0; c < z.channels(); ++c) {
                const double v = z.at(x, y, c);
                out.at(x, y, c) = v + rate * (target.at(x, y, c) - v) + pull * edge * (1.0 - v);
            }
        }
    }
    return out;
}

void ToyDiffusionBackend::check_lineart(const Conditioning& cond) const {
    if (cond.lineart && (cond.lineart->width() != latent_width() || cond.lineart->height() != latent_height() ||
                         cond.lineart->channels() != 1)) {
        throw DimensionMismatch("lineart must be single-channel at latent resolution");
    }
}

LatentRaster ToyDiffusionBackend::denoise_step(const LatentRaster& z, int t, const Conditioning& cond) const {
    if (t <= 0) {
        throw StepOutOfRange("denoise_step needs t > 0");
    }
    check_lineart(cond);
    const LatentRaster goal = conditioned_target(cond);
    return toy_update(z, goal, cond.lineart ? &*cond.lineart : nullptr, params_.denoise_rate, params_.lineart_pull);
}

Image ToyDiffusionBackend::generate(const Conditioning& cond, int steps, std::uint64_t seed,
                                    const StepHook& hook) const {
    if (steps < 1) {
        throw ConfigError("generation needs at least one step");
    }
    check_lineart(cond);
    // Same loop as the base class, with the conditioned target computed once.
    const LatentRaster goal = conditioned_target(cond);
    const LatentRaster* lineart = cond.lineart ? &*cond.lineart : nullptr;
    LatentRaster z = noise_sample(latent_template(), steps - 1, seed);
    for (int t = steps - 1; t >= 0; --t) {
        if (hook) hook(t, z);
        if (t > 0) z = toy_update(z, goal, lineart, params_.denoise_rate, params_.lineart_pull);
    }
    return decode(z);
}

}  // namespace stagecraft
