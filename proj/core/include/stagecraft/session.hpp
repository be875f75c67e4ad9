// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stagecraft/promptbook.hpp"

namespace stagecraft {

struct CharacterArtifact {
    int id = 0;
    std::string reference_ref;
    std::string onstage_ref;
    friend bool operator==(const CharacterArtifact&, const CharacterArtifact&) = default;
};

struct TurnRecord {
    int index = 0;
    std::string instruction;
    PromptBook prompt_book;
    std::string image_ref;  // sha256 of the PNG bytes
    std::vector<CharacterArtifact> characters;
    std::vector<std::string> notes;
    friend bool operator==(const TurnRecord&, const TurnRecord&) = default;
};

struct DialogueSession {
    std::string session_id;
    std::uint64_t seed = 0;
    Canvas canvas;
    std::vector<TurnRecord> turns;
    friend bool operator==(const DialogueSession&, const DialogueSession&) = default;
};

nlohmann::ordered_json turn_to_json(const TurnRecord& turn);
TurnRecord turn_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json session_to_json(const DialogueSession& session);
DialogueSession session_from_json(const nlohmann::ordered_json& j);

// Canonical text form: two-space indentation and a trailing newline.
std::string dump_canonical(const nlohmann::ordered_json& j);

}  // namespace stagecraft
