// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <benchmark/benchmark.h>

#include <stagecraft/evaluator.hpp>

using namespace stagecraft;

namespace {

FeatureSet features(int n, int dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    FeatureSet s(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(dim)));
    for (auto& v : s)
        for (auto& x : v) x = g(rng);
    return s;
}

void BM_Afid(benchmark::State& state) {
    const int dim = static_cast<int>(state.range(0));
    const auto a = features(200, dim, 1), b = features(200, dim, 2);
    for (auto _ : state) benchmark::DoNotOptimize(afid(a, b));
}
BENCHMARK(BM_Afid)->Arg(16)->Arg(64)->Arg(192)->Unit(benchmark::kMillisecond);

void BM_MeanPercent(benchmark::State& state) {
    std::vector<double> cosines(1000, 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(mean_percent(cosines));
}
BENCHMARK(BM_MeanPercent);

}  // namespace
