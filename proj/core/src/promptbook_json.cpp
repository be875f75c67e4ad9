// SPDX-License-Identifier: Apache-2.0

#include "stagecraft/errors.hpp"
#include "stagecraft/promptbook.hpp"
#include "stagecraft/session.hpp"

namespace stagecraft {

using ordered_json = nlohmann::ordered_json;

nlohmann::ordered_json prompt_book_to_json(const PromptBook& book, const std::string& caption) {
    ordered_json objects = ordered_json::array();
    for (const auto& e : book.characters) {
        objects.push_back(ordered_json::array({e.prompt, ordered_json::array({e.bbox.x, e.bbox.y, e.bbox.w, e.bbox.h}), e.id}));
    }
    ordered_json j;
    j["caption"] = caption;
    j["objects"] = std::move(objects);
    j["background"] = book.background_prompt;
    j["negative"] = book.negative_prompt.empty() ? std::string("None") : book.negative_prompt;
    return j;
}

PromptBook prompt_book_from_json(const nlohmann::ordered_json& turn) {
    PromptBook book;
    try {
        book.background_prompt = turn.at("background").get<std::string>();
        book.negative_prompt = normalize_negative(turn.at("negative").get<std::string>());
        for (const auto& item : turn.at("objects")) {
            if (!item.is_array() || item.size() != 3 || !item[1].is_array() || item[1].size() != 4) {
                throw ParseError("object entries must be [prompt, [x, y, w, h], id]", 0);
            }
            if (!item[2].is_number_integer()) {
                throw ParseError("non-integer character id", 0);
            }
            CharacterEntry e;
            e.prompt = item[0].get<std::string>();
            e.bbox = {item[1][0].get<int>(), item[1][1].get<int>(), item[1][2].get<int>(), item[1][3].get<int>()};
            e.id = item[2].get<int>();
            book.characters.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("malformed turn object: ") + ex.what(), 0);
    }
    return book;
}

nlohmann::ordered_json turn_to_json(const TurnRecord& turn) {
    ordered_json j;
    j["index"] = turn.index;
    const ordered_json book = prompt_book_to_json(turn.prompt_book, turn.instruction);
    for (const auto& [key, value] : book.items()) j[key] = value;
    j["image"] = turn.image_ref;
    ordered_json chars = ordered_json::array();
    for (const auto& c : turn.characters) {
        chars.push_back({{"id", c.id}, {"reference", c.reference_ref}, {"onstage", c.onstage_ref}});
    }
    j["characters"] = std::move(chars);
    j["notes"] = turn.notes;
    return j;
}

TurnRecord turn_from_json(const nlohmann::ordered_json& j) {
    TurnRecord t;
    try {
        t.index = j.at("index").get<int>();
        t.instruction = j.at("caption").get<std::string>();
        t.prompt_book = prompt_book_from_json(j);
        t.image_ref = j.at("image").get<std::string>();
        for (const auto& c : j.value("characters", ordered_json::array())) {
            t.characters.push_back({c.at("id").get<int>(), c.at("reference").get<std::string>(),
                                    c.at("onstage").get<std::string>()});
        }
        t.notes = j.value("notes", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("malformed turn record: ") + ex.what(), 0);
    }
    return t;
}

nlohmann::ordered_json session_to_json(const DialogueSession& session) {
    ordered_json j;
    j["session_id"] = session.session_id;
    j["seed"] = session.seed;
    j["canvas"] = ordered_json::array({session.canvas.width, session.canvas.height});
    ordered_json turns = ordered_json::array();
    for (const auto& t : session.turns) turns.push_back(turn_to_json(t));
    j["turns"] = std::move(turns);
    return j;
}

DialogueSession session_from_json(const nlohmann::ordered_json& j) {
    DialogueSession s;
    try {
        s.session_id = j.at("session_id").get<std::string>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.canvas = {j.at("canvas").at(0).get<int>(), j.at("canvas").at(1).get<int>()};
        for (const auto& t : j.at("turns")) s.turns.push_back(turn_from_json(t));
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("malformed session: ") + ex.what(), 0);
    }
    return s;
}

std::string dump_canonical(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace stagecraft
