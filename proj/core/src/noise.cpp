// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "stagecraft/backends.hpp"
#include "stagecraft/errors.hpp"
#include "stagecraft/hashing.hpp"

namespace stagecraft {

NoiseSchedule NoiseSchedule::linear(int steps) {
    if (steps < 1) {
        throw ConfigError("schedule needs at least one step");
    }
    NoiseSchedule s;
    s.alphas_cum.resize(steps);
    if (steps == 1) {
        s.alphas_cum[0] = 1.0;
        return s;
    }
    for (int t = 0; t < steps; ++t) {
        s.alphas_cum[t] = 1.0 - static_cast<double>(t) / (steps - 1);
    }
    s.alphas_cum.back() = 0.0;
    return s;
}

LatentRaster noise_sample(const LatentRaster& shape, int t, std::uint64_t seed) {
    LatentRaster eps(shape.width(), shape.height(), shape.channels());
    for (std::size_t i = 0; i < eps.size(); ++i) {
        eps[i] = counter_normal(seed, static_cast<std::uint64_t>(t), i);
    }
    return eps;
}

LatentRaster diffuse_with(const LatentRaster& x0, const LatentRaster& eps, double alpha_cum) {
    if (!x0.same_shape(eps)) {
        throw DimensionMismatch("noise and latent shapes differ");
    }
    const double keep = std::sqrt(alpha_cum);
    const double mix = std::sqrt(1.0 - alpha_cum);
    LatentRaster out(x0.width(), x0.height(), x0.channels());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = keep * x0[i] + mix * eps[i];
    }
    return out;
}

LatentRaster forward_diffuse(const LatentRaster& x0, int t, const NoiseSchedule& schedule, std::uint64_t seed) {
    if (t < 0 || t >= schedule.steps()) {
        throw StepOutOfRange("step " + std::to_string(t) + " outside [0, " + std::to_string(schedule.steps()) + ")");
    }
    return diffuse_with(x0, noise_sample(x0, t, seed), schedule.alphas_cum[t]);
}

Image DiffusionBackend::generate(const Conditioning& cond, int steps, std::uint64_t seed, const StepHook& hook) const {
    if (steps < 1) {
        throw ConfigError("generation needs at least one step");
    }
    LatentRaster z = noise_sample(latent_template(), steps - 1, seed);
    for (int t = steps - 1; t >= 0; --t) {
        if (hook) hook(t, z);
        if (t > 0) z = denoise_step(z, t, cond);
    }
    return decode(z);
}

}  // namespace stagecraft
