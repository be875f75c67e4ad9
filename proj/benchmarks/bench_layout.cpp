// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <benchmark/benchmark.h>

#include <stagecraft/layout.hpp>
#include <stagecraft/promptbook.hpp>

using namespace stagecraft;

namespace {

std::vector<BoundingBox> crowded_layout(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<BoundingBox> boxes;
    for (int i = 0; i < n; ++i) {
        const int w = 60 + static_cast<int>(rng() % 80), h = 60 + static_cast<int>(rng() % 80);
        boxes.push_back({180 + static_cast<int>(rng() % 60), 180 + static_cast<int>(rng() % 60), w, h});
    }
    return boxes;
}

void BM_Disperse(benchmark::State& state) {
    const auto boxes = crowded_layout(static_cast<int>(state.range(0)), 17);
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(disperse(boxes, {}, ++seed));
}
BENCHMARK(BM_Disperse)->Arg(2)->Arg(5)->Arg(10);

void BM_MaxPairwiseOverlap(benchmark::State& state) {
    const auto boxes = crowded_layout(static_cast<int>(state.range(0)), 3);
    for (auto _ : state) benchmark::DoNotOptimize(max_pairwise_overlap(boxes));
}
BENCHMARK(BM_MaxPairwiseOverlap)->Arg(5)->Arg(20);

void BM_ParsePromptBook(benchmark::State& state) {
    const std::string text =
        "<Characters>: [(\"a pen\", [97, 235, 162, 222], 1), (\"a spatula\", [217, 55, 198, 232], 2)]\n"
        "<Background prompt>: empty background\n<Negative prompt>: None\n";
    for (auto _ : state) benchmark::DoNotOptimize(parse_prompt_book(text));
}
BENCHMARK(BM_ParsePromptBook);

}  // namespace
