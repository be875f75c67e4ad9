// SPDX-License-Identifier: Apache-2.0

#include <fstream>

#include "stagecraft/benchkit.hpp"
#include "stagecraft/png_io.hpp"
#include "text_util.hpp"

namespace stagecraft {
namespace {

// Worked examples substituted into the elided example slot of each template.
const char* kStoryExample =
    R"("dialogue 1": {"characters": ["sparrow", "lion", "eagle"], "scene": ["library"], )"
    R"("turn 1": {"caption": "In the silent library, a tiny sparrow was fluttering near a shelf.", )"
    R"("objects": [["a tiny sparrow", [115, 170, 89, 59], 1], ["a library shelf", [215, 165, 171, 171], 2]], )"
    R"("background": "A silent library", "negative": "None"}, )"
    R"("turn 2": {"caption": "An attentive lion in one corner was carefully observing the bird and holding its breath.", )"
    R"("objects": [["an attentive lion", [300, 221, 162, 180], 3], ["a tiny sparrow", [40, 101, 89, 59], 1]], )"
    R"("background": "A silent library", "negative": "None"}, )"
    R"("turn 3": {"caption": "Above them, a vigilant eagle watched the suspenseful scene unfold from the library ceiling.", )"
    R"("objects": [["a vigilant eagle", [345, 41, 119, 72], 4], ["an observing lion", [295, 281, 162, 180], 3], )"
    R"(["a sparrow", [45, 171, 89, 59], 1]], "background": "A silent library", "negative": "None"}, )"
    R"("turn 4": {"caption": "The scenario ended peacefully as the eagle, the lion, and the sparrow all resumed their own activities in the vast library.", )"
    R"("objects": [["an occupying eagle", [335, 41, 119, 72], 4], ["a peaceful lion", [285, 281, 162, 180], 3], )"
    R"(["a sparrow", [55, 181, 89, 59], 1]], "background": "A vast library", "negative": "None"}})";

const char* kEditingExample =
    R"("dialogue 1": {"characters": ["spatula", "pen"], "scene": "empty background", )"
    R"("turn 1": {"caption": "[Spacial Round] I want a pen down of a spatula", )"
    R"("objects": [["a pen", [97, 235, 162, 222], 1], ["a spatula", [217, 55, 198, 232], 2]], )"
    R"("background": "empty background", "negative": "None"}, )"
    R"("turn 2": {"caption": "[Attribute Round] Turn the pen into a blue one", )"
    R"("objects": [["a blue pen", [97, 235, 162, 222], 1], ["a spatula", [217, 55, 198, 232], 2]], )"
    R"("background": "empty background", "negative": "None"}, )"
    R"("turn 3": {"caption": "[Negative Round] I don't want this anymore", )"
    R"("objects": [["a spatula", [157, 140, 198, 232], 2]], "background": "empty background", "negative": "a blue pen"}, )"
    R"("turn 4": {"caption": "[Numeracy Round] I want four of the remaining object.", )"
    R"("objects": [["a spatula", [4, 20, 198, 232], 2], ["a spatula", [219, 20, 198, 232], 2], )"
    R"(["a spatula", [85, 260, 198, 232], 2], ["a spatula", [310, 260, 198, 232], 2]], )"
    R"("background": "empty background", "negative": "None"}})";

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i > 0) out += (i + 1 == names.size()) ? " and " : ", ";
        out += names[i];
    }
    return out;
}

std::string object_list(const std::vector<std::string>& names) {
    std::string out = "[";
    for (std::size_t i = 0; i < names.size(); ++i) out += (i ? ", '" : "'") + names[i] + "'";
    return out + "]";
}

[[noreturn]] void schema_error(const std::string& what) { throw ParseError("dialogue schema: " + what, 0); }

int read_int(const nlohmann::json& v, const std::string& where) {
    if (v.is_number_integer()) return v.get<int>();
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d == static_cast<double>(static_cast<int>(d))) return static_cast<int>(d);
    }
    schema_error(where + " must be an integer");
}

std::string read_string(const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj.at(key).is_string()) schema_error(where + "." + key + " must be a string");
    return obj.at(key).get<std::string>();
}

}  // namespace

std::string build_story_prompt(const Selection& s) {
    if (s.characters.empty()) throw TemplateError("story template needs at least one character");
    if (s.scene.empty()) throw TemplateError("story template needs a scene");
    return "Please give me a story with " + join_names(s.characters) +
           " as protagonists. The setting background is " + s.scene +
           ". Each story contains four simple and human natural language sentences. Each sentence contains less "
           "than 4 objects. All objects are countable nouns and are singular, with no postattributive. If the "
           "protagonist has been mentioned in the previous text, subsequent sentences should use pronouns to refer "
           "to the protagonist. The protagonist must be something with a precise number of nouns. You should "
           "generate the bounding boxes for the objects mentioned in the caption and number them, along with a "
           "background prompt describing the scene. The number indicates the number of mentioned objects. The "
           "images are of size 512 x 512. The top-left corner has coordinates [0, 0]. The bottom-right corner has "
           "coordinates [512, 512]. Pay attention to ensure the generated layout size is appropriate and not too "
           "small. The bounding boxes should not overlap or go beyond the image boundaries. Each bounding box should "
           "be in the format of ( an object with an article a or an and a modifier, [ top - left x coordinate, top "
           "- left y coordinate, box width, box height ], object number) and the content in '' must be the singular "
           "form of a or an plus an adjective plus a countable noun and should not include more than one object. "
           "You should completely avoid situations where the bounding boxes of objects overlap, so you can make the "
           "bounding boxes between different objects have an appropriate distance and need design reasonable x, y, "
           "box width, and box height. Do not put objects that are already provided in the bounding boxes into the "
           "background prompt. When describing the same picture, different objects should not have the same "
           "numbers. If you think the description refers to the same objects in the previous conservation, its "
           "number should be consistent with the previous conservation. Do not include non-existing or excluded "
           "objects in the background prompt. Use 'a realistic scene' as the background prompt if no background is "
           "given in the prompt. If needed, you can make reasonable guesses. Please refer to the example below for "
           "the desired format. The following is an example of a story and its layout, and you needn't mimic its "
           "sentence structure, you should focus on the format of the following example:" +
           std::string(kStoryExample) + " Now generate the story, the box for each character should be as large as "
           "possible.";
}

std::string build_editing_prompt(const Selection& s) {
    if (s.characters.empty()) throw TemplateError("editing template needs an object list");
    if (!s.number_pick || s.number_pick->empty()) throw TemplateError("editing template needs a number pick");
    if (!s.relation_pick || s.relation_pick->empty()) throw TemplateError("editing template needs a relation pick");
    return "You need to simulate a series of multi-round editing instructions. You will receive an object list:[]. "
           "The [Spacial Round] should focus on spatial relations. The [Attribute round] should focus on attributes. "
           "The [Negative Round] should focus on negatives. The [Numeracy Round] should focus on numeracy. If the "
           "object has been mentioned in the last text, subsequent sentences should use pronouns to refer to the "
           "protagonist. You should generate the bounding boxes for the objects mentioned in the caption and give "
           "them an id, along with a background prompt (empty). The images are of size 512 x 512. The top-left "
           "corner has coordinates [0, 0]. The bottom-right corner has coordinates [512, 512]. The bounding boxes "
           "should not overlap or go beyond the image boundaries. Each bounding box should be in the format of ( "
           "an object with an article and a modifier, [ top - left x coordinate, top - left y coordinate, box "
           "width, box height ], object number) and the content in '' must be the singular form of a or an plus an "
           "adjective plus a countable noun and should not include more than one object. Do not put objects that "
           "are already provided in the bounding boxes ito the background prompt. If you think the description "
           "refers to the same objects in the previous conservation, its id should be consistent with the previous "
           "conservation(even changed attribute or numeracy). Do not include non-existing or excluded objects in "
           "the background prompt. The dialogue must include four types of edit rounds, and [indicate the type] "
           "should be used at the beginning. Here is an example output:" +
           std::string(kEditingExample) + " You must use quantities at [Numeracy Round] as " + *s.number_pick +
           " and positional relationships in [Spacial Round] as " + *s.relation_pick +
           ". Now, generate the following object list:" + object_list(s.characters);
}

std::string build_bench_prompt(const Selection& s) {
    return s.task == BenchTask::Story ? build_story_prompt(s) : build_editing_prompt(s);
}

nlohmann::ordered_json dialogue_to_json(const BenchDialogue& d) {
    nlohmann::ordered_json j;
    j["characters"] = d.characters;
    if (d.scene_as_list) {
        j["scene"] = nlohmann::ordered_json::array({d.scene});
    } else {
        j["scene"] = d.scene;
    }
    for (std::size_t t = 0; t < d.turns.size(); ++t) {
        const auto& turn = d.turns[t];
        nlohmann::ordered_json tj;
        tj["caption"] = turn.caption;
        tj["objects"] = nlohmann::ordered_json::array();
        for (const auto& o : turn.objects) {
            tj["objects"].push_back({o.prompt, {o.bbox.x, o.bbox.y, o.bbox.w, o.bbox.h}, o.id});
        }
        tj["background"] = turn.background;
        tj["negative"] = turn.negative;
        j["turn " + std::to_string(t + 1)] = std::move(tj);
    }
    return j;
}

BenchDialogue dialogue_from_json(const nlohmann::ordered_json& j) {
    if (!j.is_object()) schema_error("dialogue must be an object");
    BenchDialogue d;
    if (!j.contains("characters") || !j.at("characters").is_array()) schema_error("characters must be a list");
    for (const auto& c : j.at("characters")) {
        if (!c.is_string()) schema_error("characters must hold strings");
        d.characters.push_back(c.get<std::string>());
    }
    if (!j.contains("scene")) schema_error("scene is missing");
    const auto& scene = j.at("scene");
    if (scene.is_string()) {
        d.scene = scene.get<std::string>();
    } else if (scene.is_array() && scene.size() == 1 && scene[0].is_string()) {
        d.scene = scene[0].get<std::string>();
        d.scene_as_list = true;
    } else {
        schema_error("scene must be a string or a one-element list");
    }
    std::size_t turn_keys = 0;
    for (const auto& [key, value] : j.items()) {
        if (key == "characters" || key == "scene") continue;
        if (key.rfind("turn ", 0) != 0) schema_error("unexpected key '" + key + "'");
        ++turn_keys;
    }
    for (std::size_t t = 1; t <= turn_keys; ++t) {
        const std::string key = "turn " + std::to_string(t);
        if (!j.contains(key)) schema_error("turn keys are not consecutive (missing '" + key + "')");
        const auto& tj = j.at(key);
        if (!tj.is_object()) schema_error(key + " must be an object");
        BenchTurn turn;
        turn.caption = read_string(tj, "caption", key);
        turn.background = read_string(tj, "background", key);
        turn.negative = read_string(tj, "negative", key);
        if (!tj.contains("objects") || !tj.at("objects").is_array()) schema_error(key + ".objects must be a list");
        for (const auto& o : tj.at("objects")) {
            const std::string where = key + ".objects";
            if (!o.is_array() || o.size() != 3 || !o[0].is_string() || !o[1].is_array() || o[1].size() != 4) {
                schema_error(where + " entries must be [prompt, [x, y, w, h], id]");
            }
            CharacterEntry e;
            e.prompt = o[0].get<std::string>();
            e.bbox = {read_int(o[1][0], where), read_int(o[1][1], where), read_int(o[1][2], where),
                      read_int(o[1][3], where)};
            e.id = read_int(o[2], where);
            turn.objects.push_back(std::move(e));
        }
        for (const auto& [k, v] : tj.items()) {
            if (k != "caption" && k != "objects" && k != "background" && k != "negative") {
                schema_error(key + " has unexpected key '" + k + "'");
            }
        }
        d.turns.push_back(std::move(turn));
    }
    return d;
}

std::string serialize_dialogue(const BenchDialogue& d) { return dialogue_to_json(d).dump(2); }

nlohmann::ordered_json corpus_to_json(const BenchCorpus& corpus) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [name, d] : corpus) j[name] = dialogue_to_json(d);
    return j;
}

BenchCorpus corpus_from_json(const nlohmann::ordered_json& j) {
    if (!j.is_object()) schema_error("corpus must be an object of dialogues");
    BenchCorpus corpus;
    for (const auto& [name, value] : j.items()) corpus.emplace_back(name, dialogue_from_json(value));
    return corpus;
}

BenchCorpus load_corpus(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& ex) {
        throw ParseError("corpus " + path.string() + ": " + ex.what(), ex.byte);
    }
    return corpus_from_json(j);
}

void save_corpus(const BenchCorpus& corpus, const std::filesystem::path& path) {
    const std::string text = corpus_to_json(corpus).dump(2) + "\n";
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

PromptBook turn_prompt_book(const BenchTurn& turn) {
    PromptBook b;
    b.characters = turn.objects;
    b.background_prompt = turn.background;
    b.negative_prompt = normalize_negative(turn.negative);
    return b;
}

}  // namespace stagecraft
