// SPDX-License-Identifier: Apache-2.0

#include "fixture_writer.hpp"

#include <algorithm>
#include <regex>

#include <yaml-cpp/yaml.h>

#include <stagecraft/hashing.hpp>

namespace stagecraft::tools {
namespace {

const std::vector<std::string> kColors{"red", "blue", "green", "yellow", "purple", "black", "white", "orange"};
const std::vector<std::string> kMoods{"tiny", "brave", "curious", "sleepy", "cheerful", "gentle", "clever", "quiet"};
const std::vector<std::string> kLaterMoods{"calm", "happy", "playful", "watchful", "relaxed", "proud"};
const std::vector<std::string> kProps{"shelf", "bench", "lamp", "rock", "basket", "crate"};

std::string with_article(const std::string& phrase) {
    const char c = phrase.empty() ? 'x' : phrase[0];
    const bool vowel = std::string("aeiou").find(c) != std::string::npos;
    return (vowel ? "an " : "a ") + phrase;
}

const std::string& pick(const std::vector<std::string>& list, SeededRng& rng) { return list[rng.below(list.size())]; }

int jitter(SeededRng& rng, int span) { return static_cast<int>(rng.below(static_cast<std::uint64_t>(span) + 1)); }

// A box inside one cell of a 2x2 grid over the 512 canvas.
BoundingBox cell_box(int cell, SeededRng& rng) {
    const int cx = (cell % 2) * 256;
    const int cy = (cell / 2) * 256;
    const int w = 150 + jitter(rng, 70);
    const int h = 150 + jitter(rng, 70);
    return {cx + 10 + jitter(rng, 236 - 10 - w + 10), cy + 10 + jitter(rng, 236 - 10 - h + 10), w, h};
}

std::vector<int> shuffled_cells(SeededRng& rng) {
    std::vector<int> cells{0, 1, 2, 3};
    for (int i = 3; i > 0; --i) std::swap(cells[i], cells[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    return cells;
}

// Boxes for `a <relation> b`, side by side or stacked, each within its half.
std::pair<BoundingBox, BoundingBox> related_boxes(const std::string& relation, SeededRng& rng) {
    const int w = 160 + jitter(rng, 50);
    const int h = 160 + jitter(rng, 50);
    const int across = 20 + jitter(rng, 256 - 40 - w + 20);
    const int along = 40 + jitter(rng, 512 - 80 - h);
    BoundingBox first{across, along, w, h};
    BoundingBox second{256 + across, 40 + jitter(rng, 512 - 80 - h), w, h};
    if (relation == "to the top of" || relation == "to the down of") {
        const int down = 20 + jitter(rng, 256 - 40 - h + 20);
        first = {40 + jitter(rng, 512 - 80 - w), down, w, h};
        second = {40 + jitter(rng, 512 - 80 - w), 256 + down, w, h};
    }
    if (relation == "to the right of" || relation == "to the down of") std::swap(first, second);
    return {first, second};
}

std::vector<BoundingBox> count_boxes(int n, SeededRng& rng) {
    const int rows = n <= 3 ? 1 : 2;
    const int cols = (n + rows - 1) / rows;
    const int cw = 512 / cols;
    const int ch = 512 / rows;
    std::vector<BoundingBox> out;
    for (int i = 0; i < n; ++i) {
        const int r = i / cols;
        const int c = i % cols;
        const int w = cw - 24 - jitter(rng, 12);
        const int h = std::min(ch - 24 - jitter(rng, 12), 240);
        out.push_back({c * cw + (cw - w) / 2, r * ch + (ch - h) / 2, w, h});
    }
    return out;
}

BenchTurn make_turn(std::string caption, std::vector<CharacterEntry> objects, std::string background,
                    std::string negative = "None") {
    return BenchTurn{std::move(caption), std::move(objects), std::move(background), std::move(negative)};
}

BenchDialogue editing_dialogue(const Selection& s, SeededRng& rng) {
    const std::string& a = s.characters.at(0);
    const std::string& b = s.characters.at(1);
    const std::string color = pick(kColors, rng);
    const std::string& relation = *s.relation_pick;
    const int n = *count_from_word(*s.number_pick);
    const std::string bg = "empty background";
    BenchDialogue d;
    d.characters = s.characters;
    d.scene = s.scene;
    auto [box_a, box_b] = related_boxes(relation, rng);
    const std::string pa = with_article(a);
    const std::string pb = with_article(b);
    const std::string colored = with_article(color + " " + a);
    d.turns.push_back(make_turn("[Spacial Round] I want " + pa + " " + relation + " " + pb,
                                {{1, pa, box_a}, {2, pb, box_b}}, bg));
    d.turns.push_back(make_turn("[Attribute Round] Turn the " + a + " into " + with_article(color) + " one",
                                {{1, colored, box_a}, {2, pb, box_b}}, bg));
    const BoundingBox centered{(512 - box_b.w) / 2, (512 - box_b.h) / 2, box_b.w, box_b.h};
    d.turns.push_back(make_turn("[Negative Round] I don't want the " + color + " " + a + " anymore",
                                {{2, pb, centered}}, bg, colored));
    std::vector<CharacterEntry> copies;
    for (const auto& box : count_boxes(n, rng)) copies.push_back({2, pb, box});
    d.turns.push_back(make_turn("[Numeracy Round] I want " + *s.number_pick + " of the remaining object.",
                                std::move(copies), bg));
    return d;
}

BenchDialogue story_dialogue(const Selection& s, SeededRng& rng) {
    BenchDialogue d;
    d.characters = s.characters;
    d.scene = s.scene;
    d.scene_as_list = true;
    const std::string bg = "A " + pick(kMoods, rng) + " " + s.scene;
    std::string prop = pick(kProps, rng);
    if (s.scene.find(prop) != std::string::npos) prop = "lantern";
    const auto& cast = s.characters;
    std::vector<std::string> looks;
    for (std::size_t i = 0; i < cast.size(); ++i) looks.push_back(with_article(kMoods[(rng.below(8) + i) % 8] + " " + cast[i]));

    auto cells = shuffled_cells(rng);
    d.turns.push_back(make_turn("In the " + s.scene + ", " + looks[0] + " was resting near " + with_article(prop) + ".",
                                {{1, looks[0], cell_box(cells[0], rng)}, {2, with_article(prop), cell_box(cells[1], rng)}},
                                bg));
    cells = shuffled_cells(rng);
    d.turns.push_back(make_turn("Soon " + looks[1] + " arrived and watched the " +
                                    cast[0] + " closely.",
                                {{3, looks[1], cell_box(cells[0], rng)}, {1, looks[0], cell_box(cells[1], rng)}}, bg));
    cells = shuffled_cells(rng);
    std::vector<CharacterEntry> third;
    std::string caption3;
    if (cast.size() > 2) {
        caption3 = "Then " + looks[2] + " joined them from above.";
        third = {{4, looks[2], cell_box(cells[0], rng)},
                 {3, looks[1], cell_box(cells[1], rng)},
                 {1, looks[0], cell_box(cells[2], rng)}};
    } else {
        caption3 = "The " + cast[1] + " and the " + cast[0] + " soon became friends.";
        third = {{3, with_article(pick(kLaterMoods, rng) + " " + cast[1]), cell_box(cells[0], rng)},
                 {1, with_article(pick(kLaterMoods, rng) + " " + cast[0]), cell_box(cells[1], rng)}};
    }
    d.turns.push_back(make_turn(caption3, third, bg));
    cells = shuffled_cells(rng);
    std::vector<CharacterEntry> last;
    for (std::size_t i = 0; i < third.size(); ++i) {
        const std::string noun = head_noun(third[i].prompt);
        const auto& who = *std::find_if(cast.begin(), cast.end(), [&](const std::string& c) { return head_noun(c) == noun; });
        last.push_back({third[i].id, with_article(pick(kLaterMoods, rng) + " " + who), cell_box(cells[i], rng)});
    }
    d.turns.push_back(make_turn("In the end, everyone rested peacefully in the " + s.scene + ".", last, bg));
    return d;
}

std::string compact(const BenchDialogue& d) {
    // One line per turn, in the style of hand-edited corpus files.
    const auto j = dialogue_to_json(d);
    std::string out = "{\n";
    bool first = true;
    for (const auto& [key, value] : j.items()) {
        out += (first ? "  \"" : ",\n  \"") + key + "\": " + value.dump();
        first = false;
    }
    return out + "\n}";
}

void replace_once(std::string& s, const std::string& from, const std::string& to) {
    const auto pos = s.find(from);
    if (pos != std::string::npos) s.replace(pos, from.size(), to);
}

void replace_last(std::string& s, const std::string& from, const std::string& to) {
    const auto pos = s.rfind(from);
    if (pos != std::string::npos) s.replace(pos, from.size(), to);
}

// Formatting slips, one per answer, rotating through the repair categories.
std::string with_slip(const std::string& clean, int k, int slip) {
    std::string s = clean;
    switch (slip) {
        case 1:
            return "Sure! Here is the dialogue you asked for:\n\"dialogue " + std::to_string(k) + "\": " + s;
        case 2:
            replace_once(s, "]],\"background\"", "]]，\"background\"");
            replace_once(s, "\"caption\":", "\"caption\"：");
            return s;
        case 3: {
            static const std::regex entry(R"re(\["([^"]*)",\[(\d+),(\d+),(\d+),(\d+)\],(\d+)\])re");
            return std::regex_replace(s, entry, R"re(("$1",[$2,$3,$4,$5],$6))re");
        }
        case 4:
            replace_once(s, "]],\"background\"", "]]\n    \"background\"");
            return s;
        case 5:
            replace_last(s, "]],\"background\"", "],\"background\"");
            return s;
        case 6:
            replace_once(s, "]],\"background\"", "],],\"background\"");
            replace_last(s, "\"negative\":\"None\"}", "\"negative\":\"None\",}");
            return s;
        case 7:
            replace_last(s, "\"negative\":\"None\"", "\"negative\":None");
            return s;
        default:
            return s;
    }
}

// A first draft whose layout must be rejected: one turn puts a character into the
// background prompt.
BenchDialogue leaky_draft(BenchDialogue d) {
    auto& turn = d.turns.at(1);
    turn.background = turn.background + " with " + turn.objects.front().prompt;
    return d;
}

// A draft with two boxes overlapping enough that dispersion has to move them.
BenchDialogue crowded_draft(BenchDialogue d) {
    auto& objs = d.turns.front().objects;
    if (objs.size() >= 2) {
        objs[1].bbox.x = std::clamp(objs[0].bbox.x + objs[0].bbox.w / 3, 0, 512 - objs[1].bbox.w);
        objs[1].bbox.y = std::clamp(objs[0].bbox.y + objs[0].bbox.h / 3, 0, 512 - objs[1].bbox.h);
    }
    return d;
}

}  // namespace

std::map<int, std::vector<std::string>> write_bench_answers(const CharacterPools& pools, const FixtureOptions& options) {
    std::map<int, std::vector<std::string>> answers;
    for (int k = 1; k <= options.count; ++k) {
        const std::uint64_t seed = dialogue_seed(options.seed, k);
        const Selection s = sample_characters(pools, options.task, seed);
        SeededRng rng(derive_seed(seed, "fixture", 0, 0));
        const BenchDialogue d = options.task == BenchTask::Editing ? editing_dialogue(s, rng) : story_dialogue(s, rng);
        const int slip = (k - 1) % 8;
        std::vector<std::string> slot;
        if (k % 7 == 3) slot.push_back(with_slip(compact(leaky_draft(d)), k, 0));
        const BenchDialogue final_draft = (k % 5 == 2) ? crowded_draft(d) : d;
        slot.push_back(with_slip(compact(final_draft), k, slip));
        answers.emplace(k, std::move(slot));
    }
    return answers;
}

std::string answers_to_yaml(const std::map<int, std::vector<std::string>>& answers, const std::string& header) {
    YAML::Emitter out;
    out << YAML::Comment(header);
    out << YAML::BeginMap << YAML::Key << "responses" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, list] : answers) {
        out << YAML::Key << k << YAML::Value << YAML::BeginSeq;
        for (const auto& text : list) out << YAML::Literal << text;
        out << YAML::EndSeq;
    }
    out << YAML::EndMap << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

}  // namespace stagecraft::tools
