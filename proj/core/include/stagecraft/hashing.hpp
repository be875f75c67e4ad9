// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace stagecraft {

std::uint64_t fnv1a64(std::string_view text);

// SplitMix64 finalizer; a bijective avalanche mix.
std::uint64_t mix64(std::uint64_t value);

// Stable derivation of child seeds from a base seed and a label.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t a = 0, std::uint64_t b = 0);

// Counter-based streams: the value at (seed, stream, index) is computable without
// generating its predecessors.
double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);
double counter_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// Small sequential generator with a platform-independent double mapping, used where
// std:: distributions would make results depend on the standard library.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);   // [lo, hi)
    std::uint64_t below(std::uint64_t bound);

private:
    std::uint64_t state_;
};

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view bytes);

}  // namespace stagecraft
