// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <benchmark/benchmark.h>

#include <stagecraft/performance.hpp>
#include <stagecraft/rehearsal.hpp>

using namespace stagecraft;

namespace {

const ToyDiffusionBackend& backend() {
    static const ToyDiffusionBackend b;
    return b;
}

void BM_BlendLatent(benchmark::State& state) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    LatentRaster z(64, 64, 3), g(64, 64, 3);
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = n(rng);
        g[i] = n(rng);
    }
    Mask m(64, 64, 1, 0);
    for (std::size_t i = 0; i < m.size(); i += 2) m[i] = 1;
    GuidedRunConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(blend_latent(z, g, m, 30, cfg));
}
BENCHMARK(BM_BlendLatent);

struct Scene {
    PromptBook book;
    GuidanceBundle bundle;
};

Scene scene(int steps) {
    Scene s;
    s.book.background_prompt = "a sunny park";
    s.book.characters = {{1, "a red box", {48, 64, 192, 160}}, {2, "a quiet mouse", {280, 240, 176, 200}}};
    std::vector<Cutout> cuts;
    for (const auto& e : s.book.characters) {
        cuts.push_back(full_image_cutout(generate_onstage(e, std::nullopt, backend(), steps, 3 + e.id)));
    }
    s.bundle = build_guidance(compose_midstate(cuts, s.book.characters, backend().canvas()), backend(), steps, 3);
    return s;
}

void BM_BuildGuidance(benchmark::State& state) {
    const Scene s = scene(50);
    std::vector<Cutout> cuts;
    for (const auto& e : s.book.characters) {
        cuts.push_back(full_image_cutout(generate_onstage(e, std::nullopt, backend(), 50, 3 + e.id)));
    }
    const auto mid = compose_midstate(cuts, s.book.characters, backend().canvas());
    for (auto _ : state) benchmark::DoNotOptimize(build_guidance(mid, backend(), 50, 3));
}
BENCHMARK(BM_BuildGuidance)->Unit(benchmark::kMillisecond);

void BM_GuidedGeneration(benchmark::State& state) {
    const Scene s = scene(50);
    GuidedRunConfig cfg;
    cfg.steps = 50;
    for (auto _ : state) benchmark::DoNotOptimize(run_guided_generation(s.book, s.bundle, backend(), cfg));
}
BENCHMARK(BM_GuidedGeneration)->Unit(benchmark::kMillisecond);

}  // namespace
