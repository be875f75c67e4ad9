// SPDX-License-Identifier: Apache-2.0

#include "stagecraft/screenwriter.hpp"

#include <set>

#include "stagecraft/errors.hpp"
#include "stagecraft/hashing.hpp"

namespace stagecraft {
namespace {

const char* kTaskDescription =
    "Your task is to generate the bounding boxes for the objects mentioned in the caption and number them, "
    "along with a background prompt describing the scene. The number indicates the number of mentioned objects.";

const char* kSupportingDetails =
    "The images are of size 512 x 512. The top-left corner has coordinates [0, 0]. The bottom-right corner has "
    "coordinates [512, 512]. Pay attention to ensure the generated layout size is appropriate and not too small. "
    "The bounding boxes should not overlap or go beyond the image boundaries. Each bounding box should be in the "
    "format of ( an object with an article a or an and a modifier, [ top - left x coordinate, top - left y "
    "coordinate, box width, box height ], object number) and the content in '' must be the singular form of a or "
    "an plus an adjective plus a countable noun and should not include more than one object. You should completely "
    "avoid situations where the bounding boxes of objects overlap, so you can make the bounding boxes between "
    "different objects have an appropriate distance and need design reasonable x, y, box width, and box height. Do "
    "not put objects that are already provided in the bounding boxes into the background prompt. When describing "
    "the same picture, different objects should not have the same numbers. If you think the description refers to "
    "the same objects in the previous conservation, its number should be consistent with the previous "
    "conservation, such as a green apple and a red apple. Do not include non-existing or excluded objects in the "
    "background prompt. Use \"a realistic scene\" as the background prompt if no background is given in the "
    "prompt. If needed, you can make reasonable guesses.";

// Two short worked dialogues written for this project.
const char* kExampleGarden =
    "Turn 1 instruction: A grey cat sits next to a red ball in the garden.\n"
    "<Characters>: [(\"a grey cat\", [60, 200, 190, 210], 1), (\"a red ball\", [320, 300, 120, 120], 2)]\n"
    "<Background prompt>: A sunny garden\n"
    "<Negative prompt>: None\n"
    "Turn 2 instruction: Now the cat is black, and add a small bird on the left.\n"
    "<Characters>: [(\"a black cat\", [180, 200, 190, 210], 1), (\"a red ball\", [400, 330, 100, 100], 2), "
    "(\"a small bird\", [20, 60, 110, 90], 3)]\n"
    "<Background prompt>: A sunny garden\n"
    "<Negative prompt>: None";

const char* kExampleDesk =
    "Turn 1 instruction: Put three green apples on an empty table.\n"
    "<Characters>: [(\"a green apple\", [30, 180, 140, 140], 1), (\"a green apple\", [186, 180, 140, 140], 1), "
    "(\"a green apple\", [342, 180, 140, 140], 1)]\n"
    "<Background prompt>: An empty table\n"
    "<Negative prompt>: None\n"
    "Turn 2 instruction: Remove the apples and show a white mug instead.\n"
    "<Characters>: [(\"a white mug\", [156, 140, 200, 220], 2)]\n"
    "<Background prompt>: An empty table\n"
    "<Negative prompt>: a green apple";

std::string render_turn(const TurnRecord& turn) {
    return "Turn " + std::to_string(turn.index) + " instruction: " + turn.instruction + "\n" +
           serialize_prompt_book(turn.prompt_book);
}

std::string correction_note(const std::vector<std::string>& kinds) {
    std::string joined;
    for (const auto& k : kinds) joined += (joined.empty() ? "" : ", ") + k;
    return "Correction request: the previous answer was rejected (" + joined +
           "). Regenerate the full prompt book in the required three-field format.";
}

}  // namespace

DesignerTemplate DesignerTemplate::standard() {
    DesignerTemplate t;
    t.task_description = kTaskDescription;
    t.supporting_details = kSupportingDetails;
    t.examples = {kExampleGarden, kExampleDesk};
    t.history_renderer = render_turn;
    return t;
}

std::string build_designer_prompt(const std::vector<TurnRecord>& history, const std::string& instruction,
                                  const DesignerTemplate& tmpl) {
    std::string out;
    out += "<Task Description>: " + tmpl.task_description + "\n\n";
    out += "<Supporting details>: " + tmpl.supporting_details + "\n\n";
    out += "<Examples>:\n";
    for (std::size_t i = 0; i < tmpl.examples.size(); ++i) {
        out += "Example " + std::to_string(i + 1) + ":\n" + tmpl.examples[i] + "\n";
    }
    out += "\n<History dialogue>:\n";
    const auto& render = tmpl.history_renderer ? tmpl.history_renderer : render_turn;
    const std::size_t first = history.size() > tmpl.history_limit ? history.size() - tmpl.history_limit : 0;
    for (std::size_t i = first; i < history.size(); ++i) {
        out += render(history[i]);
    }
    out += "\n<Current instruction>: " + instruction + "\n";
    return out;
}

DesignOutcome design_turn(const std::vector<TurnRecord>& history, const std::string& instruction, LlmClient& client,
                          const DesignerTemplate& tmpl, const DesignOptions& options) {
    if (options.max_retries < 1) {
        throw ConfigError("max_retries must be >= 1");
    }
    const std::string base = build_designer_prompt(history, instruction, tmpl);
    const int turn_index = static_cast<int>(history.size()) + 1;
    DesignOutcome outcome;
    std::string prompt = base;
    for (int attempt = 0; attempt < options.max_retries; ++attempt) {
        LlmParams params;
        params.seed = derive_seed(options.seed, "design", static_cast<std::uint64_t>(turn_index),
                                  static_cast<std::uint64_t>(attempt));
        params.max_tokens = options.max_tokens;
        params.turn_index = turn_index;
        params.attempt = attempt;
        std::string raw = client.complete(prompt, params);
        outcome.transcripts.push_back(raw);
        std::vector<std::string> problems;
        try {
            PromptBook book = parse_prompt_book(raw);
            std::set<std::string> kinds;
            for (const auto& v : validate(book, options.canvas, options.overlap_threshold)) {
                if (v.kind != ViolationKind::Overlap) kinds.insert(to_string(v.kind));
            }
            if (kinds.empty()) {
                outcome.book = std::move(book);
                return outcome;
            }
            problems.assign(kinds.begin(), kinds.end());
        } catch (const ParseError& ex) {
            problems.push_back("PARSE_ERROR: " + ex.detail() + " at offset " + std::to_string(ex.offset()));
        }
        prompt = base + "\n" + correction_note(problems) + "\n";
    }
    throw DesignFailure("prompt book design failed after " + std::to_string(options.max_retries) + " attempts",
                        outcome.transcripts);
}

}  // namespace stagecraft
