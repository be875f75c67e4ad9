// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include <stagecraft/benchkit.hpp>
#include <stagecraft/errors.hpp>

#include "support.hpp"

using namespace stagecraft;

namespace {

bool has_kind(const std::vector<DialogueViolation>& vs, DialogueViolationKind k) {
    return std::any_of(vs.begin(), vs.end(), [&](const DialogueViolation& v) { return v.kind == k; });
}

BenchDialogue raw_dialogue(const std::string& name) {
    return repair_format(testsupport::read_text(testsupport::fixture(name))).dialogue;
}

BenchTurn bench_turn(std::string caption, std::vector<CharacterEntry> objects, std::string negative = "None") {
    return {std::move(caption), std::move(objects), "empty background", std::move(negative)};
}

BenchDialogue random_dialogue(testsupport::Gen& gen) {
    BenchDialogue d;
    d.characters = {"pen", "spatula"};
    d.scene = gen.coin() ? "empty background" : "library";
    d.scene_as_list = gen.coin();
    for (int t = 0; t < 4; ++t) {
        BenchTurn turn;
        turn.caption = "turn " + std::to_string(t + 1) + " says \"hi\", ok";
        for (int k = gen.integer(0, 4); k > 0; --k) turn.objects.push_back({gen.integer(1, 6), gen.phrase(), gen.box({})});
        turn.background = gen.coin() ? "empty background" : "a quiet room";
        turn.negative = gen.coin() ? "None" : gen.phrase();
        d.turns.push_back(turn);
    }
    return d;
}

}  // namespace

TEST(Pools, BuiltinListsAreCleanAndSized) {
    const auto pools = CharacterPools::builtin();
    EXPECT_NO_THROW(pools.check());
    EXPECT_EQ(pools.fruit.size(), 50u);
    EXPECT_EQ(pools.animal.size(), 35u);
    EXPECT_EQ(pools.human.size(), 7u);
    EXPECT_EQ(pools.background.size(), 50u);
    EXPECT_GE(pools.object.size(), 90u);
    for (const auto* pool : {&pools.fruit, &pools.object, &pools.animal, &pools.human, &pools.background}) {
        EXPECT_EQ(std::set<std::string>(pool->begin(), pool->end()).size(), pool->size());
    }
}

TEST(Pools, CheckRejectsDuplicatesAndEmptyPools) {
    auto pools = CharacterPools::builtin();
    pools.fruit.push_back(pools.fruit.front());
    EXPECT_THROW(pools.check(), ConfigError);
    pools = CharacterPools::builtin();
    pools.human.clear();
    EXPECT_THROW(pools.check(), ConfigError);
}

TEST(Sampling, EditingDrawsAreWellFormed) {
    const auto pools = CharacterPools::builtin();
    const std::set<std::string> objects(pools.object.begin(), pools.object.end());
    const std::set<std::string> fruit(pools.fruit.begin(), pools.fruit.end());
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto s = sample_characters(pools, BenchTask::Editing, seed);
        ASSERT_TRUE(s.relation_pick && s.number_pick);
        const auto& rel = relation_choices();
        const auto& num = number_choices();
        EXPECT_NE(std::find(rel.begin(), rel.end(), *s.relation_pick), rel.end());
        EXPECT_NE(std::find(num.begin(), num.end(), *s.number_pick), num.end());
        for (const auto& c : s.characters) EXPECT_TRUE(objects.count(c) || fruit.count(c)) << c;
    }
    EXPECT_EQ(relation_choices(),
              (std::vector<std::string>{"to the left of", "to the right of", "to the top of", "to the down of"}));
    EXPECT_EQ(number_choices(), (std::vector<std::string>{"two", "three", "four", "five"}));
}

TEST(Sampling, StoryDrawsNeverTouchFruitOrObjects) {
    const auto pools = CharacterPools::builtin();
    const std::set<std::string> allowed = [&] {
        std::set<std::string> s(pools.human.begin(), pools.human.end());
        s.insert(pools.animal.begin(), pools.animal.end());
        return s;
    }();
    const std::set<std::string> scenes(pools.background.begin(), pools.background.end());
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto s = sample_characters(pools, BenchTask::Story, seed);
        EXPECT_FALSE(s.number_pick.has_value());
        std::set<std::string> distinct;
        for (const auto& c : s.characters) {
            EXPECT_TRUE(allowed.count(c)) << c;
            distinct.insert(c);
        }
        EXPECT_EQ(distinct.size(), s.characters.size());
        EXPECT_TRUE(scenes.count(s.scene));
    }
}

TEST(Sampling, IsDeterministicUnderSeed) {
    const auto pools = CharacterPools::builtin();
    for (auto task : {BenchTask::Story, BenchTask::Editing}) {
        const auto a = sample_characters(pools, task, 99), b = sample_characters(pools, task, 99);
        EXPECT_EQ(a.characters, b.characters);
        EXPECT_EQ(a.scene, b.scene);
        EXPECT_EQ(a.number_pick, b.number_pick);
        EXPECT_EQ(a.relation_pick, b.relation_pick);
    }
}

TEST(Templates, EditingPromptCarriesTheConstraints) {
    Selection s;
    s.task = BenchTask::Editing;
    s.characters = {"pen", "spatula"};
    s.scene = "empty background";
    s.number_pick = "four";
    s.relation_pick = "to the left of";
    const auto prompt = build_editing_prompt(s);
    EXPECT_NE(prompt.find("four"), std::string::npos);
    EXPECT_NE(prompt.find("to the left of"), std::string::npos);
    EXPECT_NE(prompt.find("pen"), std::string::npos);
    EXPECT_EQ(build_bench_prompt(s), prompt);
    s.number_pick.reset();
    EXPECT_THROW(build_editing_prompt(s), TemplateError);
}

TEST(Templates, StoryPromptNamesEveryCharacter) {
    Selection s;
    s.characters = {"sparrow", "lion"};
    s.scene = "library";
    const auto prompt = build_story_prompt(s);
    const auto first_line = prompt.substr(0, prompt.find('\n'));
    EXPECT_NE(first_line.find("sparrow"), std::string::npos);
    EXPECT_NE(first_line.find("lion"), std::string::npos);
    EXPECT_NE(prompt.find("library"), std::string::npos);
    s.characters.clear();
    EXPECT_THROW(build_story_prompt(s), TemplateError);
    s.characters = {"lion"};
    s.scene.clear();
    EXPECT_THROW(build_story_prompt(s), TemplateError);
}

TEST(Repair, RawEditingDialogueParsesAfterCommaRepair) {
    const auto raw = testsupport::read_text(testsupport::fixture("raw_editing_dialogue.txt"));
    const auto r = repair_format(raw);
    ASSERT_EQ(r.dialogue.turns.size(), 4u);
    EXPECT_EQ(r.dialogue.characters, (std::vector<std::string>{"spatula", "pen"}));
    EXPECT_EQ(r.dialogue.turns[0].objects[0], (CharacterEntry{1, "a pen", {97, 235, 162, 222}}));
    EXPECT_EQ(r.dialogue.turns[2].negative, "a blue pen");
    EXPECT_EQ(r.dialogue.turns[3].objects.size(), 4u);
    const auto commas = std::find_if(r.passes.begin(), r.passes.end(),
                                     [](const RepairPassReport& p) { return p.pass == "insert_missing_commas"; });
    ASSERT_NE(commas, r.passes.end());
    EXPECT_EQ(commas->edits, 4);
    RepairOptions no_commas;
    no_commas.insert_missing_commas = false;
    EXPECT_THROW(repair_format(raw, no_commas), RepairFailure);
}

TEST(Repair, RawStoryKeepsTheSceneList) {
    const auto d = raw_dialogue("raw_story_dialogue.txt");
    EXPECT_TRUE(d.scene_as_list);
    EXPECT_EQ(d.scene, "library");
    EXPECT_EQ(d.turns[3].background, "A vast library");
}

TEST(Repair, ValidTextIsLeftAlone) {
    const auto d = raw_dialogue("raw_editing_dialogue.txt");
    const auto r = repair_format(serialize_dialogue(d));
    EXPECT_EQ(r.dialogue, d);
    EXPECT_EQ(r.total_edits(), 0);
    EXPECT_EQ(r.passes.size(), 7u);
}

TEST(RepairProperty, SerializeThenRepairIsIdentity) {
    testsupport::Gen gen(44);
    for (int i = 0; i < 150; ++i) {
        const BenchDialogue d = random_dialogue(gen);
        const auto r = repair_format(serialize_dialogue(d));
        EXPECT_EQ(r.dialogue, d);
        EXPECT_EQ(r.total_edits(), 0);
    }
}

TEST(Repair, UnclosedBracket) {
    auto text = serialize_dialogue(raw_dialogue("raw_editing_dialogue.txt"));
    const auto at = text.find("]\n    ],");
    ASSERT_NE(at, std::string::npos);
    text.erase(at, 1);
    const auto r = repair_format(text);
    EXPECT_EQ(r.dialogue, raw_dialogue("raw_editing_dialogue.txt"));
}

TEST(Repair, FullWidthPunctuation) {
    const std::string text =
        "{\"characters\"：[\"pen\"，\"cup\"]，\"scene\"：\"empty background\"，"
        "\"turn 1\"：{\"caption\"：\"put a pen\"，\"objects\"：[[\"a pen\"，[1，2，30，40]，1]]，"
        "\"background\"：\"empty background\"，\"negative\"：\"None\"}}";
    const auto r = repair_format(text);
    EXPECT_EQ(r.dialogue.turns.at(0).objects.at(0).bbox, (BoundingBox{1, 2, 30, 40}));
    EXPECT_GT(r.passes[1].edits, 0);
}

TEST(Repair, ChatterTuplesTrailingCommasAndPythonLiterals) {
    const std::string text =
        "Sure! Here is the dialogue:\n```json\n"
        "{'characters': ['pen'], 'scene': 'empty background',\n"
        " 'turn 1': {'caption': 'put a pen', 'objects': [('a pen', (1, 2, 30, 40), 1),],\n"
        "   'background': 'empty background', 'negative': None,},}\n```\nHope this helps.";
    const auto r = repair_format(text);
    ASSERT_EQ(r.dialogue.turns.size(), 1u);
    EXPECT_EQ(r.dialogue.turns[0].objects[0].prompt, "a pen");
    EXPECT_EQ(r.dialogue.turns[0].negative, "None");
    for (const char* pass : {"extract_payload", "normalize_punctuation", "tuples_to_lists", "strip_trailing_commas",
                             "disambiguate_text_lists"}) {
        const auto it = std::find_if(r.passes.begin(), r.passes.end(),
                                     [&](const RepairPassReport& p) { return p.pass == pass; });
        ASSERT_NE(it, r.passes.end());
        EXPECT_GT(it->edits, 0) << pass;
    }
}

TEST(Repair, TextListsBecomeStructured) {
    const std::string text =
        "{\"characters\": \"pen, cup\", \"scene\": [\"empty background\"], \"turn 1\": {\"caption\": [\"put a pen\"], "
        "\"objects\": \"[[\\\"a pen\\\", [1, 2, \\\"30\\\", 40], \\\"1\\\"]]\", \"background\": \"empty background\", "
        "\"negative\": []}}";
    const auto r = repair_format(text);
    EXPECT_EQ(r.dialogue.characters, (std::vector<std::string>{"pen", "cup"}));
    EXPECT_EQ(r.dialogue.turns[0].caption, "put a pen");
    EXPECT_EQ(r.dialogue.turns[0].objects[0], (CharacterEntry{1, "a pen", {1, 2, 30, 40}}));
    EXPECT_EQ(r.dialogue.turns[0].negative, "None");
}

TEST(Repair, HopelessInputReportsEveryPass) {
    try {
        repair_format("this is not a dialogue at all");
        FAIL() << "expected RepairFailure";
    } catch (const RepairFailure& e) {
        EXPECT_EQ(e.passes().size(), 7u);
        EXPECT_EQ(e.passes().front().pass, "extract_payload");
    }
    EXPECT_THROW(repair_format("{\"characters\": [\"pen\"]}"), RepairFailure);
}

TEST(DialogueJson, StrictReaderRejectsWrongShapes) {
    const auto good = dialogue_to_json(raw_dialogue("raw_editing_dialogue.txt"));
    EXPECT_EQ(dialogue_from_json(good), raw_dialogue("raw_editing_dialogue.txt"));
    auto bad = good;
    bad["turn 1"]["objects"][0][1] = nlohmann::ordered_json::array({1, 2, 3});
    EXPECT_THROW(dialogue_from_json(bad), ParseError);
    bad = good;
    bad["turn 2"].erase("caption");
    EXPECT_THROW(dialogue_from_json(bad), ParseError);
}

TEST(DialogueJson, CorpusKeepsDialogueOrder) {
    testsupport::Gen gen(5);
    BenchCorpus corpus;
    for (int k = 1; k <= 12; ++k) corpus.emplace_back("dialogue " + std::to_string(k), random_dialogue(gen));
    testsupport::TempDir dir;
    save_corpus(corpus, dir.path() / "c.json");
    const auto back = load_corpus(dir.path() / "c.json");
    ASSERT_EQ(back.size(), corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        EXPECT_EQ(back[i].first, corpus[i].first);
        EXPECT_EQ(back[i].second, corpus[i].second);
    }
}

TEST(Correction, CleanDialogueIsUntouched) {
    const auto d = raw_dialogue("raw_editing_dialogue.txt");
    const auto r = correct_dialogue(d);
    EXPECT_EQ(r.dialogue, d);
    EXPECT_TRUE(r.report.empty());
}

TEST(Correction, DispersesACrowdedTurn) {
    BenchDialogue d = raw_dialogue("raw_editing_dialogue.txt");
    d.turns[0].objects = {{1, "a pen", {100, 100, 200, 200}}, {2, "a spatula", {140, 140, 200, 200}}};
    ASSERT_NEAR(overlap_fraction(d.turns[0].objects[0].bbox, d.turns[0].objects[1].bbox), 0.64, 1e-12);
    const auto r = correct_dialogue(d, 0.25, 3);
    const auto& objs = r.dialogue.turns[0].objects;
    EXPECT_LE(overlap_fraction(objs[0].bbox, objs[1].bbox), 0.25);
    ASSERT_FALSE(r.report.moves.empty());
    for (const auto& m : r.report.moves) {
        EXPECT_EQ(m.turn, 1);
        const auto& before = d.turns[0].objects[m.object].bbox;
        EXPECT_EQ(objs[m.object].bbox.x, before.x + m.dx);
        EXPECT_EQ(objs[m.object].bbox.y, before.y + m.dy);
    }
    EXPECT_FALSE(r.report.needs_regeneration());
}

TEST(Correction, OverlapOfFortyPercentIsRepaired) {
    BenchDialogue d = raw_dialogue("raw_editing_dialogue.txt");
    d.turns[1].objects = {{1, "a blue pen", {0, 0, 100, 100}}, {2, "a spatula", {60, 0, 100, 100}}};
    ASSERT_NEAR(overlap_fraction(d.turns[1].objects[0].bbox, d.turns[1].objects[1].bbox), 0.4, 1e-12);
    const auto r = correct_dialogue(d);
    EXPECT_LE(max_pairwise_overlap(std::vector<BoundingBox>{r.dialogue.turns[1].objects[0].bbox,
                                                            r.dialogue.turns[1].objects[1].bbox}),
              0.25);
    EXPECT_FALSE(r.report.moves.empty());
}

TEST(Correction, InfeasibleTurnAndLeaksAreFlagged) {
    BenchDialogue d = raw_dialogue("raw_editing_dialogue.txt");
    d.turns[3].objects = {{2, "a spatula", {0, 0, 512, 512}}, {2, "a spatula", {0, 0, 512, 512}}};
    d.turns[1].background = "a spatula rack";
    const auto r = correct_dialogue(d);
    EXPECT_EQ(r.report.regenerate_turns, (std::vector<int>{2, 4}));
    EXPECT_EQ(r.report.background_leak_turns, (std::vector<int>{2}));
    EXPECT_EQ(r.dialogue.turns[3].objects, d.turns[3].objects);
}

TEST(CorrectionProperty, NeverResizesOrRecaptions) {
    testsupport::Gen gen(71);
    for (int i = 0; i < 100; ++i) {
        const BenchDialogue d = random_dialogue(gen);
        const auto r = correct_dialogue(d, 0.25, static_cast<std::uint64_t>(i));
        ASSERT_EQ(r.dialogue.turns.size(), d.turns.size());
        for (std::size_t t = 0; t < d.turns.size(); ++t) {
            EXPECT_EQ(r.dialogue.turns[t].caption, d.turns[t].caption);
            EXPECT_EQ(r.dialogue.turns[t].background, d.turns[t].background);
            for (std::size_t k = 0; k < d.turns[t].objects.size(); ++k) {
                EXPECT_EQ(r.dialogue.turns[t].objects[k].bbox.w, d.turns[t].objects[k].bbox.w);
                EXPECT_EQ(r.dialogue.turns[t].objects[k].bbox.h, d.turns[t].objects[k].bbox.h);
                EXPECT_EQ(r.dialogue.turns[t].objects[k].prompt, d.turns[t].objects[k].prompt);
            }
        }
    }
}

TEST(ValidateDialogue, RawDialoguesAreClean) {
    EXPECT_TRUE(validate_dialogue(raw_dialogue("raw_editing_dialogue.txt"), BenchTask::Editing).empty());
    EXPECT_TRUE(validate_dialogue(raw_dialogue("raw_story_dialogue.txt"), BenchTask::Story).empty());
    EXPECT_EQ(infer_edit_types(raw_dialogue("raw_editing_dialogue.txt")),
              (std::vector<EditType>{EditType::Spatial, EditType::Attribute, EditType::Negative, EditType::Numeracy}));
}

TEST(ValidateDialogue, TurnCount) {
    BenchDialogue d = raw_dialogue("raw_editing_dialogue.txt");
    d.turns.pop_back();
    const auto vs = validate_dialogue(d, BenchTask::Editing);
    EXPECT_TRUE(has_kind(vs, DialogueViolationKind::TurnCount));
}

TEST(ValidateDialogue, NegativeBeforeAttributeBreaksTheOrder) {
    BenchDialogue d = raw_dialogue("raw_editing_dialogue.txt");
    std::swap(d.turns[1], d.turns[2]);
    EXPECT_TRUE(has_kind(validate_dialogue(d, BenchTask::Editing), DialogueViolationKind::TypeOrder));
    EXPECT_FALSE(has_kind(validate_dialogue(d, BenchTask::Story), DialogueViolationKind::TypeOrder));
}

TEST(ValidateDialogue, CaptionTagsOverrideInference) {
    BenchDialogue d;
    d.characters = {"pen"};
    d.scene = "empty background";
    d.turns = {bench_turn("[Spacial Round] a pen", {{1, "a pen", {0, 0, 50, 50}}}),
               bench_turn("[Attribute Round] same pen", {{1, "a pen", {0, 0, 50, 50}}}),
               bench_turn("[Negative Round] and keep it", {{1, "a pen", {0, 0, 50, 50}}}),
               bench_turn("[Numeracy Round] still one", {{1, "a pen", {0, 0, 50, 50}}})};
    EXPECT_TRUE(validate_dialogue(d, BenchTask::Editing).empty());
}

TEST(ValidateDialogue, IdContinuityAndBounds) {
    BenchDialogue d = raw_dialogue("raw_story_dialogue.txt");
    d.turns[0].objects[1].id = 5;  // so the lion's id 3 in turn 2 lies below an id already handed out
    EXPECT_TRUE(has_kind(validate_dialogue(d, BenchTask::Story), DialogueViolationKind::IdContinuity));
    d = raw_dialogue("raw_story_dialogue.txt");
    d.turns[2].objects[1].prompt = "a hungry tiger";  // id 3 changes species
    EXPECT_TRUE(has_kind(validate_dialogue(d, BenchTask::Story), DialogueViolationKind::IdContinuity));
    d = raw_dialogue("raw_story_dialogue.txt");
    d.turns[0].objects[0].bbox = {500, 500, 89, 59};
    const auto vs = validate_dialogue(d, BenchTask::Story);
    ASSERT_TRUE(has_kind(vs, DialogueViolationKind::OutOfBounds));
    EXPECT_EQ(vs.front().turn, 1);
}

TEST(BenchTaskNames, RoundTrip) {
    EXPECT_EQ(bench_task_from_string(to_string(BenchTask::Story)), BenchTask::Story);
    EXPECT_EQ(bench_task_from_string("editing"), BenchTask::Editing);
    EXPECT_THROW(bench_task_from_string("poetry"), ConfigError);
}
