// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "stagecraft/backends.hpp"
#include "stagecraft/png_io.hpp"
#include "stagecraft/promptbook.hpp"

namespace stagecraft {

struct Cutout {
    Image image;
    Mask mask;
};

struct MidStateImage {
    Image canvas;
    std::map<int, Mask> placed_masks;  // entry index -> canvas-resolution mask
};

struct GuidanceBundle {
    std::vector<LatentRaster> latent_sequence;  // index t = 0 .. T-1
    Mask lineart;
    Mask union_mask;
    std::map<int, Mask> per_char_masks;
};

inline constexpr double kBlankFill = 0.5;

// Write-once PNG store keyed by (session, character id). An empty root keeps
// everything in memory; otherwise files live at <root>/<session>/<id>.png with an
// index.json beside them.
class ReferenceStore {
public:
    explicit ReferenceStore(std::filesystem::path root = {});

    std::optional<Bytes> find(const std::string& session, int id) const;
    bool contains(const std::string& session, int id) const { return find(session, id).has_value(); }
    void put(const std::string& session, int id, const Bytes& png, const std::string& prompt);
    std::size_t count(const std::string& session) const;
    void erase_session(const std::string& session);
    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path session_dir(const std::string& session) const;

    std::filesystem::path root_;
    mutable std::mutex mutex_;
    mutable std::map<std::pair<std::string, int>, Bytes> cache_;
};

struct ReferenceImage {
    Image image;
    Bytes png;
    bool created = false;
};

Image create_reference(const CharacterEntry& entry, const DiffusionBackend& backend, int steps, std::uint64_t seed);

ReferenceImage get_or_create_reference(const std::string& session, const CharacterEntry& entry,
                                       const DiffusionBackend& backend, ReferenceStore& store, int steps,
                                       std::uint64_t seed);

Image generate_onstage(const CharacterEntry& entry, const std::optional<Image>& reference,
                       const DiffusionBackend& backend, int steps, std::uint64_t seed);

Cutout extract_cutout(const Image& image, const std::string& prompt, const Detector& detector,
                      const Segmenter& segmenter, const DetectionThresholds& thresholds = {});

Cutout full_image_cutout(const Image& image);

MidStateImage compose_midstate(const std::vector<Cutout>& cutouts, const std::vector<CharacterEntry>& entries,
                               const Canvas& canvas, double fill = kBlankFill, int channels = 3);

std::vector<LatentRaster> extract_latent_guidance(const MidStateImage& mid, const DiffusionBackend& backend, int steps,
                                                  std::uint64_t seed);

Mask extract_lineart(const MidStateImage& mid, double threshold_fraction = 0.1);

Mask union_masks(const std::vector<Mask>& masks);

GuidanceBundle build_guidance(const MidStateImage& mid, const DiffusionBackend& backend, int steps, std::uint64_t seed);

}  // namespace stagecraft
