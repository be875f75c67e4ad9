// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stagecraft/geometry.hpp"

namespace stagecraft {

struct CharacterEntry {
    int id = 0;
    std::string prompt;
    BoundingBox bbox;
    friend bool operator==(const CharacterEntry&, const CharacterEntry&) = default;
};

struct PromptBook {
    std::string background_prompt;
    std::string negative_prompt;  // empty means "None"
    std::vector<CharacterEntry> characters;
    friend bool operator==(const PromptBook&, const PromptBook&) = default;
};

enum class ViolationKind { OutOfBounds, Overlap, BackgroundLeak, BadId, EmptyScene };

const char* to_string(ViolationKind kind);

struct Violation {
    ViolationKind kind;
    std::vector<int> entries;  // indices into PromptBook::characters
    std::string message;
};

struct CharacterDiff {
    std::set<int> new_ids;
    std::set<int> retained_ids;
    std::set<int> removed_ids;
};

// Text grammar: three marker lines, markers optionally wrapped in angle brackets.
//   <Characters>: [("a tiny sparrow", [115, 170, 89, 59], 1), ...]
//   <Background prompt>: A silent library
//   <Negative prompt>: None
PromptBook parse_prompt_book(std::string_view text);
std::string serialize_prompt_book(const PromptBook& book);

std::string normalize_negative(std::string_view text);

inline constexpr double kDefaultOverlapThreshold = 0.25;

std::vector<Violation> validate(const PromptBook& book, const Canvas& canvas = {},
                                double overlap_threshold = kDefaultOverlapThreshold);

bool has_only(const std::vector<Violation>& violations, ViolationKind kind);

CharacterDiff diff_characters(const PromptBook* prev, const PromptBook& cur);

std::string build_global_prompt(const PromptBook& book);

// Word-level helpers shared with benchkit and the evaluator.
std::string head_noun(std::string_view prompt);
std::string noun_stem(std::string_view word);
std::string pluralize(std::string_view noun);
std::optional<int> count_from_word(std::string_view word);
std::string count_word(int n);

// JSON forms follow the dialogue schema: {"caption", "objects", "background", "negative"}.
nlohmann::ordered_json prompt_book_to_json(const PromptBook& book, const std::string& caption);
PromptBook prompt_book_from_json(const nlohmann::ordered_json& turn);

}  // namespace stagecraft
