// SPDX-License-Identifier: Apache-2.0

#include <memory>

#include <benchmark/benchmark.h>

#include <stagecraft/backends.hpp>

using namespace stagecraft;

namespace {

std::shared_ptr<const ToyDiffusionBackend> backend() {
    static auto b = std::make_shared<const ToyDiffusionBackend>();
    return b;
}

void BM_PatternDetect(benchmark::State& state) {
    const PatternDetector detector(backend());
    const Image img = backend()->generate({"a shiny spatula", "", std::nullopt, std::nullopt}, 20, 1);
    for (auto _ : state) benchmark::DoNotOptimize(detector.detect(img, "a shiny spatula"));
}
BENCHMARK(BM_PatternDetect)->Unit(benchmark::kMillisecond);

void BM_PatternEmbed(benchmark::State& state) {
    const PatternEmbedder embedder(backend());
    const Image img = backend()->generate({"a tall lamp", "", std::nullopt, std::nullopt}, 20, 2);
    for (auto _ : state) benchmark::DoNotOptimize(embedder.embed_image(img));
}
BENCHMARK(BM_PatternEmbed)->Unit(benchmark::kMicrosecond);

void BM_ToyGenerate(benchmark::State& state) {
    const int steps = static_cast<int>(state.range(0));
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(backend()->generate({"a red box", "", std::nullopt, std::nullopt}, steps, ++seed));
    }
}
BENCHMARK(BM_ToyGenerate)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace
