// SPDX-License-Identifier: Apache-2.0

#include "stagecraft/rehearsal.hpp"

#include <algorithm>
#include <cmath>

#include "stagecraft/errors.hpp"

namespace stagecraft {

Image create_reference(const CharacterEntry& entry, const DiffusionBackend& backend, int steps, std::uint64_t seed) {
    Conditioning cond;
    cond.prompt = entry.prompt;
    return backend.generate(cond, steps, seed);
}

ReferenceImage get_or_create_reference(const std::string& session, const CharacterEntry& entry,
                                       const DiffusionBackend& backend, ReferenceStore& store, int steps,
                                       std::uint64_t seed) {
    if (auto stored = store.find(session, entry.id)) {
        return {decode_png(*stored), std::move(*stored), false};
    }
    ReferenceImage ref;
    ref.png = encode_png(create_reference(entry, backend, steps, seed));
    ref.image = decode_png(ref.png);
    ref.created = true;
    store.put(session, entry.id, ref.png, entry.prompt);
    return ref;
}

Image generate_onstage(const CharacterEntry& entry, const std::optional<Image>& reference,
                       const DiffusionBackend& backend, int steps, std::uint64_t seed) {
    Conditioning cond;
    cond.prompt = entry.prompt;
    cond.adapter_reference = reference;
    return backend.generate(cond, steps, seed);
}

Cutout extract_cutout(const Image& image, const std::string& prompt, const Detector& detector,
                      const Segmenter& segmenter, const DetectionThresholds& thresholds) {
    const auto detections = detector.detect(image, prompt);
    const Detection* best = nullptr;
    for (const auto& d : detections) {
        if (d.confidence >= thresholds.box && (!best || d.confidence > best->confidence)) best = &d;
    }
    if (!best) {
        throw NoDetection("no detection of '" + prompt + "' above the box threshold");
    }
    const Mask full = segmenter.segment(image, best->box, prompt);
    if (full.width() != image.width() || full.height() != image.height()) {
        throw DimensionMismatch("segmenter mask does not match the image");
    }
    Cutout out{crop(image, best->box), crop(full, best->box)};
    if (out.mask.empty() || count_set(out.mask) == 0) {
        throw NoDetection("segmentation of '" + prompt + "' is empty");
    }
    for (int y = 0; y < out.mask.height(); ++y) {
        for (int x = 0; x < out.mask.width(); ++x) {
            if (out.mask.at(x, y)) continue;
            for (int c = 0; c < out.image.channels(); ++c) out.image.at(x, y, c) = 0.0;
        }
    }
    return out;
}

Cutout full_image_cutout(const Image& image) {
    return {image, Mask(image.width(), image.height(), 1, 1)};
}

MidStateImage compose_midstate(const std::vector<Cutout>& cutouts, const std::vector<CharacterEntry>& entries,
                               const Canvas& canvas, double fill, int channels) {
    if (cutouts.size() != entries.size()) {
        throw DimensionMismatch("cutouts and entries must align one to one");
    }
    MidStateImage mid;
    mid.canvas = Image(canvas.width, canvas.height, channels, fill);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& box = entries[i].bbox;
        const auto& cut = cutouts[i];
        if (cut.image.channels() != channels) {
            throw DimensionMismatch("cutout channel count differs from the canvas");
        }
        if (!cut.image.same_shape(Image(cut.mask.width(), cut.mask.height(), channels))) {
            throw DimensionMismatch("cutout image and mask sizes differ");
        }
        Mask placed(canvas.width, canvas.height, 1, 0);
        if (box.w > 0 && box.h > 0 && !cut.image.empty()) {
            const Image pixels = resize_nearest(cut.image, box.w, box.h);
            const Mask keep = resize_nearest(cut.mask, box.w, box.h);
            for (int y = 0; y < box.h; ++y) {
                const int cy = box.y + y;
                if (cy < 0 || cy >= canvas.height) continue;
                for (int x = 0; x < box.w; ++x) {
                    const int cx = box.x + x;
                    if (cx < 0 || cx >= canvas.width || !keep.at(x, y)) continue;
                    for (int c = 0; c < channels; ++c) mid.canvas.at(cx, cy, c) = pixels.at(x, y, c);
                    placed.at(cx, cy) = 1;
                }
            }
        }
        mid.placed_masks[static_cast<int>(i)] = std::move(placed);
    }
    return mid;
}

std::vector<LatentRaster> extract_latent_guidance(const MidStateImage& mid, const DiffusionBackend& backend, int steps,
                                                  std::uint64_t seed) {
    const LatentRaster x0 = backend.encode(mid.canvas);
    const NoiseSchedule schedule = NoiseSchedule::linear(steps);
    std::vector<LatentRaster> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int t = 0; t < steps; ++t) out.push_back(forward_diffuse(x0, t, schedule, seed));
    return out;
}

Mask extract_lineart(const MidStateImage& mid, double threshold_fraction) {
    const Image& img = mid.canvas;
    Mask edges(img.width(), img.height(), 1, 0);
    if (img.empty()) return edges;
    const auto [lo, hi] = std::minmax_element(img.values().begin(), img.values().end());
    const double range = *hi - *lo;
    if (range <= 0.0) return edges;
    const double threshold = threshold_fraction * range;
    const int w = img.width();
    const int h = img.height();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double magnitude = 0.0;
            for (int c = 0; c < img.channels(); ++c) {
                // Central differences with edge replication at the borders.
                const double gx = 0.5 * (img.at(std::min(x + 1, w - 1), y, c) - img.at(std::max(x - 1, 0), y, c));
                const double gy = 0.5 * (img.at(x, std::min(y + 1, h - 1), c) - img.at(x, std::max(y - 1, 0), c));
                magnitude = std::max(magnitude, std::hypot(gx, gy));
            }
            edges.at(x, y) = magnitude > threshold ? 1 : 0;
        }
    }
    return edges;
}

Mask union_masks(const std::vector<Mask>& masks) {
    if (masks.empty()) return {};
    Mask out(masks.front().width(), masks.front().height(), 1, 0);
    for (const auto& m : masks) {
        if (m.width() != out.width() || m.height() != out.height() || m.channels() != 1) {
            throw DimensionMismatch("masks must share dimensions");
        }
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] || m[i]) ? 1 : 0;
    }
    return out;
}

GuidanceBundle build_guidance(const MidStateImage& mid, const DiffusionBackend& backend, int steps, std::uint64_t seed) {
    GuidanceBundle bundle;
    bundle.latent_sequence = extract_latent_guidance(mid, backend, steps, seed);
    bundle.lineart = extract_lineart(mid);
    bundle.per_char_masks = mid.placed_masks;
    std::vector<Mask> masks;
    for (const auto& [index, m] : mid.placed_masks) masks.push_back(m);
    bundle.union_mask = masks.empty() ? Mask(mid.canvas.width(), mid.canvas.height(), 1, 0) : union_masks(masks);
    return bundle;
}

}  // namespace stagecraft
