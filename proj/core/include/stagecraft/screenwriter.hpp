// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stagecraft/backends.hpp"
#include "stagecraft/promptbook.hpp"
#include "stagecraft/session.hpp"

namespace stagecraft {

struct DesignerTemplate {
    std::string task_description;
    std::string supporting_details;
    std::vector<std::string> examples;
    // Renders one prior turn; the default prints the instruction and the serialized book.
    std::function<std::string(const TurnRecord&)> history_renderer;
    std::size_t history_limit = 8;

    static DesignerTemplate standard();
};

std::string build_designer_prompt(const std::vector<TurnRecord>& history, const std::string& instruction,
                                  const DesignerTemplate& tmpl);

struct DesignOptions {
    int max_retries = 3;
    Canvas canvas;
    double overlap_threshold = kDefaultOverlapThreshold;
    std::uint64_t seed = 0;
    int max_tokens = 1024;
};

struct DesignOutcome {
    PromptBook book;
    std::vector<std::string> transcripts;  // raw LLM outputs, one per attempt
};

DesignOutcome design_turn(const std::vector<TurnRecord>& history, const std::string& instruction, LlmClient& client,
                          const DesignerTemplate& tmpl, const DesignOptions& options = {});

}  // namespace stagecraft
