// SPDX-License-Identifier: Apache-2.0

// The distribution's libbenchmark_main.a ships LTO bytecode from a different
// compiler release, so the entry point is compiled here instead.
#include <benchmark/benchmark.h>

BENCHMARK_MAIN();
