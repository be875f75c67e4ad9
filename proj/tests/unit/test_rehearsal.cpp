// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <filesystem>

#include <gtest/gtest.h>

#include <stagecraft/errors.hpp>
#include <stagecraft/png_io.hpp>
#include <stagecraft/rehearsal.hpp>

#include "support.hpp"

using namespace stagecraft;
using testsupport::toy_backend;

namespace {

class CountingBackend final : public DiffusionBackend {
public:
    explicit CountingBackend(const DiffusionBackend& inner) : inner_(inner) {}
    Canvas canvas() const override { return inner_.canvas(); }
    LatentRaster latent_template() const override { return inner_.latent_template(); }
    LatentRaster encode(const Image& image) const override { return inner_.encode(image); }
    Image decode(const LatentRaster& latent) const override { return inner_.decode(latent); }
    LatentRaster denoise_step(const LatentRaster& z, int t, const Conditioning& c) const override {
        return inner_.denoise_step(z, t, c);
    }
    Image generate(const Conditioning& c, int steps, std::uint64_t seed, const StepHook& hook) const override {
        ++generations;
        return inner_.generate(c, steps, seed, hook);
    }
    mutable std::atomic<int> generations{0};

private:
    const DiffusionBackend& inner_;
};

Mask random_mask(testsupport::Gen& gen, int w, int h, double density) {
    Mask m(w, h, 1, 0);
    for (auto& v : m.values()) v = gen.real(0, 1) < density ? 1 : 0;
    return m;
}

Cutout solid_cutout(int w, int h, double value, const Mask* mask = nullptr) {
    Cutout c{Image(w, h, 3, value), mask ? *mask : Mask(w, h, 1, 1)};
    return c;
}

}  // namespace

TEST(References, CreatedOnceThenServedFromTheStore) {
    CountingBackend backend(*toy_backend());
    ReferenceStore store;
    const CharacterEntry lion{3, "an attentive lion", {0, 0, 100, 100}};
    const auto first = get_or_create_reference("s1", lion, backend, store, 20, 5);
    EXPECT_TRUE(first.created);
    EXPECT_EQ(backend.generations, 1);
    EXPECT_EQ(store.find("s1", 3), first.png);

    const auto second = get_or_create_reference("s1", lion, backend, store, 20, 999);
    EXPECT_FALSE(second.created);
    EXPECT_EQ(second.png, first.png);
    EXPECT_EQ(backend.generations, 1);

    const CharacterEntry twin{4, "an attentive lion", {0, 0, 100, 100}};
    get_or_create_reference("s1", twin, backend, store, 20, 6);
    EXPECT_EQ(store.count("s1"), 2u);
    EXPECT_EQ(backend.generations, 2);
}

TEST(References, ImageEqualsThePlainPromptGeneration) {
    const auto& backend = *toy_backend();
    ReferenceStore store;
    const CharacterEntry pen{1, "a pen", {0, 0, 10, 10}};
    const auto ref = get_or_create_reference("s", pen, backend, store, 15, 3);
    EXPECT_EQ(ref.image, backend.generate({"a pen", "", std::nullopt, std::nullopt}, 15, 3));
}

TEST(ReferenceStore, IsWriteOnceAndPersists) {
    testsupport::TempDir dir;
    const Bytes png = encode_png(Image(4, 4, 3, 0.25));
    {
        ReferenceStore store(dir.path());
        store.put("sess", 1, png, "a pen");
        EXPECT_THROW(store.put("sess", 1, png, "a pen"), StoreError);
        EXPECT_TRUE(std::filesystem::exists(dir.path() / "sess" / "1.png"));
        EXPECT_TRUE(std::filesystem::exists(dir.path() / "sess" / "index.json"));
    }
    ReferenceStore reopened(dir.path());
    EXPECT_EQ(reopened.find("sess", 1), png);
    EXPECT_FALSE(reopened.contains("sess", 2));
    EXPECT_FALSE(reopened.contains("other", 1));
    EXPECT_THROW(reopened.put("sess", 1, png, "a pen"), StoreError);
    reopened.erase_session("sess");
    EXPECT_FALSE(reopened.contains("sess", 1));
}

TEST(Onstage, PlainAndAdapterBranches) {
    const auto& backend = *toy_backend();
    const CharacterEntry pen{1, "a blue pen", {0, 0, 10, 10}};
    EXPECT_EQ(generate_onstage(pen, std::nullopt, backend, 20, 4),
              backend.generate({"a blue pen", "", std::nullopt, std::nullopt}, 20, 4));
    const Image reference = backend.generate({"a pen", "", std::nullopt, std::nullopt}, 20, 1);
    const Image adapted = generate_onstage(pen, reference, backend, 20, 4);
    EXPECT_EQ(adapted, backend.generate({"a blue pen", "", std::nullopt, reference}, 20, 4));
    EXPECT_EQ(adapted, generate_onstage(pen, reference, backend, 20, 4));
    EXPECT_NE(adapted, generate_onstage(pen, std::nullopt, backend, 20, 4));
}

TEST(Cutout, UsesTheDetectedRegion) {
    Image img(100, 80, 3);
    for (int y = 0; y < 80; ++y)
        for (int x = 0; x < 100; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = (x + 2 * y + c) / 300.0;
    RuleTableDetector detector;
    detector.set("a pen", {{{25, 20, 50, 40}, 0.9}});
    const auto cut = extract_cutout(img, "a pen", detector, BoxSegmenter{});
    EXPECT_EQ(cut.image, crop(img, {25, 20, 50, 40}));
    EXPECT_EQ(count_set(cut.mask), 50u * 40u);
    EXPECT_EQ(cut.mask.width(), cut.image.width());
    EXPECT_EQ(cut.mask.height(), cut.image.height());
}

TEST(Cutout, BelowThresholdThrowsAndBestConfidenceWins) {
    const Image img(64, 64, 3, 0.3);
    RuleTableDetector detector;
    detector.set("a pen", {{{0, 0, 10, 10}, 0.49}});
    EXPECT_THROW(extract_cutout(img, "a pen", detector, BoxSegmenter{}), NoDetection);
    EXPECT_THROW(extract_cutout(img, "a cup", detector, BoxSegmenter{}), NoDetection);
    detector.set("a lamp", {{{0, 0, 10, 10}, 0.6}, {{20, 20, 30, 12}, 0.8}});
    const auto cut = extract_cutout(img, "a lamp", detector, BoxSegmenter{});
    EXPECT_EQ(cut.image.width(), 30);
    EXPECT_EQ(cut.image.height(), 12);
}

TEST(Cutout, FullImageFallback) {
    const Image img(16, 8, 3, 0.7);
    const auto cut = full_image_cutout(img);
    EXPECT_EQ(cut.image, img);
    EXPECT_EQ(count_set(cut.mask), 128u);
}

TEST(MidState, SingleFullCanvasPlacement) {
    const Canvas canvas{64, 64};
    Mask m(8, 8, 1, 1);
    m.at(0, 0) = 0;
    const auto mid = compose_midstate({solid_cutout(8, 8, 0.9, &m)}, {{1, "a", {0, 0, 64, 64}}}, canvas);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) EXPECT_EQ(mid.canvas.at(x, y, 1), (x < 8 && y < 8) ? kBlankFill : 0.9);
}

TEST(MidState, DisjointAndOverlappingPlacementsFollowTheOracle) {
    const Canvas canvas{96, 96};
    testsupport::Gen gen(77);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<Cutout> cuts;
        std::vector<CharacterEntry> entries;
        const int n = gen.integer(1, 4);
        for (int i = 0; i < n; ++i) {
            const int cw = gen.integer(1, 20), ch = gen.integer(1, 20);
            Cutout c{Image(cw, ch, 3), random_mask(gen, cw, ch, 0.7)};
            for (auto& v : c.image.values()) v = gen.real(0, 1);
            cuts.push_back(c);
            entries.push_back({i + 1, "x", gen.box(canvas, 4, 60)});
        }
        const auto mid = compose_midstate(cuts, entries, canvas);
        // Oracle: paint each pixel from the last entry whose stretched mask covers it.
        for (int y = 0; y < canvas.height; ++y) {
            for (int x = 0; x < canvas.width; ++x) {
                double expected[3] = {kBlankFill, kBlankFill, kBlankFill};
                for (int i = 0; i < n; ++i) {
                    const auto& b = entries[i].bbox;
                    if (x < b.x || y < b.y || x >= b.right() || y >= b.bottom()) continue;
                    const int sx = static_cast<int>(static_cast<long long>(x - b.x) * cuts[i].image.width() / b.w);
                    const int sy = static_cast<int>(static_cast<long long>(y - b.y) * cuts[i].image.height() / b.h);
                    if (!cuts[i].mask.at(sx, sy)) continue;
                    for (int c = 0; c < 3; ++c) expected[c] = cuts[i].image.at(sx, sy, c);
                }
                for (int c = 0; c < 3; ++c) ASSERT_EQ(mid.canvas.at(x, y, c), expected[c]) << x << "," << y;
            }
        }
        for (const auto& [index, placed] : mid.placed_masks) {
            const auto& b = entries[static_cast<std::size_t>(index)].bbox;
            for (int y = 0; y < canvas.height; ++y)
                for (int x = 0; x < canvas.width; ++x)
                    if (placed.at(x, y)) EXPECT_TRUE(x >= b.x && y >= b.y && x < b.right() && y < b.bottom());
        }
    }
}

TEST(MidState, MisalignedInputsAreRejected) {
    EXPECT_THROW(compose_midstate({solid_cutout(4, 4, 0.1)}, {}, {}), DimensionMismatch);
}

TEST(LatentGuidance, EndpointsAndReproducibility) {
    const auto& backend = *toy_backend();
    const auto mid = compose_midstate({solid_cutout(8, 8, 0.9)}, {{1, "a", {64, 64, 128, 128}}}, {});
    const auto seq = extract_latent_guidance(mid, backend, 12, 31);
    ASSERT_EQ(seq.size(), 12u);
    EXPECT_EQ(seq.front(), backend.encode(mid.canvas));
    EXPECT_EQ(seq.back(), noise_sample(backend.latent_template(), 11, 31));
    EXPECT_EQ(extract_latent_guidance(mid, backend, 12, 31), seq);
}

TEST(Lineart, ConstantCanvasHasNoEdges) {
    MidStateImage mid{Image(32, 32, 3, 0.5), {}};
    EXPECT_EQ(count_set(extract_lineart(mid)), 0u);
}

TEST(Lineart, RectangleEdgesHugTheBorder) {
    MidStateImage mid{Image(64, 64, 3, 0.5), {}};
    const BoundingBox r{16, 20, 24, 18};
    for (int y = r.y; y < r.bottom(); ++y)
        for (int x = r.x; x < r.right(); ++x)
            for (int c = 0; c < 3; ++c) mid.canvas.at(x, y, c) = 0.9;
    const Mask edges = extract_lineart(mid);
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            const bool near_vertical = (std::abs(x - r.x) <= 1 || std::abs(x - (r.right() - 1)) <= 1) &&
                                       y >= r.y - 1 && y <= r.bottom();
            const bool near_horizontal = (std::abs(y - r.y) <= 1 || std::abs(y - (r.bottom() - 1)) <= 1) &&
                                         x >= r.x - 1 && x <= r.right();
            if (edges.at(x, y)) EXPECT_TRUE(near_vertical || near_horizontal) << x << "," << y;
        }
    }
    // Every border pixel of the rectangle is marked.
    for (int x = r.x; x < r.right(); ++x) {
        EXPECT_TRUE(edges.at(x, r.y));
        EXPECT_TRUE(edges.at(x, r.bottom() - 1));
    }
    for (int y = r.y; y < r.bottom(); ++y) {
        EXPECT_TRUE(edges.at(r.x, y));
        EXPECT_TRUE(edges.at(r.right() - 1, y));
    }
    MidStateImage shifted = mid;
    for (auto& v : shifted.canvas.values()) v += 0.05;
    EXPECT_EQ(extract_lineart(shifted), edges);
}

TEST(UnionMasks, Examples) {
    testsupport::Gen gen(6);
    const Mask m = random_mask(gen, 20, 20, 0.3);
    EXPECT_EQ(union_masks({m}), m);
    EXPECT_EQ(union_masks({m, m}), m);
    Mask a(30, 30, 1, 0), b(30, 30, 1, 0);
    for (int i = 0; i < 100; ++i) a[static_cast<std::size_t>(i)] = 1;
    for (int i = 100; i < 300; ++i) b[static_cast<std::size_t>(i)] = 1;
    EXPECT_EQ(count_set(union_masks({a, b})), 300u);
    EXPECT_THROW(union_masks({a, Mask(10, 10, 1, 0)}), DimensionMismatch);
}

TEST(UnionMasksProperty, AssociativeCommutativeIdempotent) {
    testsupport::Gen gen(16);
    for (int i = 0; i < 50; ++i) {
        const Mask a = random_mask(gen, 17, 11, gen.real(0, 1));
        const Mask b = random_mask(gen, 17, 11, gen.real(0, 1));
        const Mask c = random_mask(gen, 17, 11, gen.real(0, 1));
        EXPECT_EQ(union_masks({a, b}), union_masks({b, a}));
        EXPECT_EQ(union_masks({union_masks({a, b}), c}), union_masks({a, union_masks({b, c})}));
        EXPECT_EQ(union_masks({a, b, c}), union_masks({c, a, b}));
        EXPECT_EQ(union_masks({a, a}), a);
    }
}

TEST(Guidance, BundleInvariants) {
    const auto& backend = *toy_backend();
    const auto mid = compose_midstate({solid_cutout(8, 8, 0.9), solid_cutout(8, 8, 0.1)},
                                      {{1, "a", {0, 0, 128, 128}}, {2, "b", {100, 100, 200, 120}}}, {});
    const auto bundle = build_guidance(mid, backend, 25, 2);
    EXPECT_EQ(bundle.latent_sequence.size(), 25u);
    EXPECT_EQ(bundle.per_char_masks.size(), 2u);
    EXPECT_EQ(bundle.union_mask, union_masks({bundle.per_char_masks.at(0), bundle.per_char_masks.at(1)}));
    EXPECT_EQ(count_set(bundle.union_mask), 128u * 128u + 200u * 120u - 28u * 28u);
    EXPECT_EQ(bundle.lineart, extract_lineart(mid));
}
