// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <stagecraft/benchkit.hpp>

namespace stagecraft::tools {

// Stand-in for the dialogue-writing language model: given the selection drawn for
// dialogue k, writes plausible raw answers, including the formatting slips and
// layout mistakes the repair and correction passes exist to catch.
struct FixtureOptions {
    BenchTask task = BenchTask::Editing;
    int count = 20;
    std::uint64_t seed = 0;
};

// Slot k holds one or more answers, indexed by attempt.
std::map<int, std::vector<std::string>> write_bench_answers(const CharacterPools& pools, const FixtureOptions& options);

std::string answers_to_yaml(const std::map<int, std::vector<std::string>>& answers, const std::string& header);

}  // namespace stagecraft::tools
