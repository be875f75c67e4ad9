// SPDX-License-Identifier: Apache-2.0

#include <condition_variable>
#include <future>
#include <thread>

#include <gtest/gtest.h>

#include <stagecraft/errors.hpp>
#include <stagecraft/orchestrator.hpp>
#include <stagecraft/png_io.hpp>
#include <stagecraft/session.hpp>

#include "support.hpp"

using namespace stagecraft;
using testsupport::load_script;
using testsupport::Pipeline;
using testsupport::run_config;

namespace {

std::set<int> ids_of(const PromptBook& b) {
    std::set<int> out;
    for (const auto& c : b.characters) out.insert(c.id);
    return out;
}

const CharacterArtifact& artifact(const TurnRecord& t, int id) {
    for (const auto& c : t.characters)
        if (c.id == id) return c;
    throw std::runtime_error("no artifact for id " + std::to_string(id));
}

// Blocks every completion until released, so a turn can be held in flight.
class GateLlm final : public LlmClient {
public:
    explicit GateLlm(std::string answer) : answer_(std::move(answer)) {}
    std::string complete(const std::string&, const LlmParams&) override {
        std::unique_lock lock(mutex_);
        entered_ = true;
        cv_.notify_all();
        cv_.wait(lock, [&] { return open_; });
        return answer_;
    }
    void wait_entered() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return entered_; });
    }
    void open() {
        std::lock_guard lock(mutex_);
        open_ = true;
        cv_.notify_all();
    }

private:
    std::string answer_;
    std::mutex mutex_;
    std::condition_variable cv_;
    bool entered_ = false, open_ = false;
};

const char* kSingleBook =
    "<Characters>: [(\"a red box\", [40, 40, 160, 160], 1)]\n<Background prompt>: a sunny park\n<Negative prompt>: None\n";

}  // namespace

class EditingReplay : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        script_ = new testsupport::DialogueScript(load_script("editing_dialogue.yaml"));
        pipeline_ = new Pipeline(script_->responses);
        auto cfg = run_config();
        cfg.seed = 7;
        outcome_ = new ReplayOutcome(replay_session(script_->instructions, pipeline_->deps(), cfg, "edit"));
    }
    static void TearDownTestSuite() {
        delete outcome_;
        delete pipeline_;
        delete script_;
    }
    static testsupport::DialogueScript* script_;
    static Pipeline* pipeline_;
    static ReplayOutcome* outcome_;
};
testsupport::DialogueScript* EditingReplay::script_ = nullptr;
Pipeline* EditingReplay::pipeline_ = nullptr;
ReplayOutcome* EditingReplay::outcome_ = nullptr;

TEST_F(EditingReplay, ProducesFourTurnsThatFollowTheScript) {
    ASSERT_TRUE(outcome_->ok());
    const auto& turns = outcome_->session.turns;
    ASSERT_EQ(turns.size(), 4u);
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(turns[i].index, i + 1);
        EXPECT_EQ(turns[i].instruction, script_->instructions[i]);
        EXPECT_EQ(turns[i].prompt_book, parse_prompt_book(script_->responses.at(i + 1).front()));
    }
    EXPECT_EQ(ids_of(turns[2].prompt_book), (std::set<int>{2}));
    EXPECT_EQ(turns[2].prompt_book.negative_prompt, "a blue pen");
    ASSERT_EQ(turns[3].prompt_book.characters.size(), 4u);
    for (const auto& c : turns[3].prompt_book.characters) {
        EXPECT_EQ(c.id, 2);
        EXPECT_EQ(c.prompt, "a spatula");
    }
    EXPECT_EQ(turns[3].characters.size(), 1u);
}

TEST_F(EditingReplay, StoresEveryArtifact) {
    const auto& turns = outcome_->session.turns;
    for (const auto& t : turns) {
        const auto png = pipeline_->blobs.get(t.image_ref);
        ASSERT_TRUE(png.has_value());
        EXPECT_EQ(sha256_hex(*png), t.image_ref);
        const Image img = decode_png(*png);
        EXPECT_EQ(img.width(), 512);
        EXPECT_EQ(img.height(), 512);
        for (const auto& c : t.characters) {
            EXPECT_TRUE(pipeline_->blobs.contains(c.reference_ref));
            EXPECT_TRUE(pipeline_->blobs.contains(c.onstage_ref));
        }
    }
}

TEST_F(EditingReplay, ReferencesAreWrittenOnceAndReused) {
    const auto& turns = outcome_->session.turns;
    EXPECT_EQ(pipeline_->references.count("edit"), 2u);
    EXPECT_EQ(artifact(turns[0], 1).reference_ref, artifact(turns[1], 1).reference_ref);
    const std::string spatula = artifact(turns[0], 2).reference_ref;
    for (const auto& t : turns) EXPECT_EQ(artifact(t, 2).reference_ref, spatula);
    EXPECT_EQ(sha256_hex(*pipeline_->references.find("edit", 1)), artifact(turns[0], 1).reference_ref);
}

TEST_F(EditingReplay, IsByteIdenticalOnReplay) {
    Pipeline again(script_->responses);
    auto cfg = run_config();
    cfg.seed = 7;
    const auto second = replay_session(script_->instructions, again.deps(), cfg, "edit");
    ASSERT_TRUE(second.ok());
    EXPECT_EQ(dump_canonical(session_to_json(second.session)), dump_canonical(session_to_json(outcome_->session)));
    for (const auto& t : second.session.turns) EXPECT_EQ(again.blobs.get(t.image_ref), pipeline_->blobs.get(t.image_ref));
}

TEST(Orchestrator, StoryReplayIntroducesIdsAcrossTurns) {
    const auto script = load_script("story_dialogue.yaml");
    Pipeline p(script.responses);
    const auto outcome = replay_session(script.instructions, p.deps(), run_config(20), "story");
    ASSERT_TRUE(outcome.ok());
    const auto& turns = outcome.session.turns;
    ASSERT_EQ(turns.size(), 4u);
    const std::vector<std::set<int>> expected_new{{1, 2}, {3}, {4}, {}};
    std::set<int> all_new;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto d = diff_characters(i ? &turns[i - 1].prompt_book : nullptr, turns[i].prompt_book);
        EXPECT_EQ(d.new_ids, expected_new[i]);
        all_new.insert(d.new_ids.begin(), d.new_ids.end());
    }
    EXPECT_EQ(p.references.count("story"), all_new.size());
    EXPECT_EQ(artifact(turns[0], 1).reference_ref, artifact(turns[3], 1).reference_ref);
    EXPECT_EQ(artifact(turns[1], 3).reference_ref, artifact(turns[2], 3).reference_ref);
}

TEST(Orchestrator, FailedTurnLeavesSessionAndStoresUntouched) {
    auto script = load_script("editing_dialogue.yaml");
    script.responses[3] = {"not a book", "also not", "never"};
    Pipeline p(script.responses);
    const auto outcome = replay_session(script.instructions, p.deps(), run_config(20), "fail");
    ASSERT_FALSE(outcome.ok());
    EXPECT_THROW(std::rethrow_exception(outcome.error), DesignFailure);
    EXPECT_EQ(outcome.session.turns.size(), 2u);
    EXPECT_EQ(p.references.count("fail"), 2u);

    // Running the failing turn directly must not append or store anything.
    DialogueSession session = outcome.session;
    const auto blobs_before = p.blobs.size();
    EXPECT_THROW(run_turn(session, script.instructions[2], p.deps(), run_config(20)), DesignFailure);
    EXPECT_EQ(session, outcome.session);
    EXPECT_EQ(p.blobs.size(), blobs_before);
}

TEST(Orchestrator, BackendFailureMidTurnCommitsNothing) {
    Pipeline p({{1, {kSingleBook}}});
    DialogueSession session{"s", 3, {}, {}};
    auto cfg = run_config(20);
    PipelineDeps deps = p.deps();
    const ToyDiffusionBackend wrong_channels(ToyDiffusionParams{.channels = 1});
    deps.diffusion = &wrong_channels;  // the detector rejects its single-channel images
    EXPECT_ANY_THROW(run_turn(session, "a box", deps, cfg));
    EXPECT_TRUE(session.turns.empty());
    EXPECT_EQ(p.references.count("s"), 0u);
    EXPECT_EQ(p.blobs.size(), 0u);
}

TEST(Orchestrator, OverlappingLayoutIsDispersed) {
    const std::string crowded =
        "<Characters>: [(\"a red box\", [100, 100, 200, 200], 1), (\"a quiet mouse\", [120, 120, 200, 200], 2)]\n"
        "<Background prompt>: a sunny park\n<Negative prompt>: None\n";
    Pipeline p({{1, {crowded}}});
    DialogueSession session{"s", 11, {}, {}};
    const auto record = run_turn(session, "crowd", p.deps(), run_config(10));
    const auto& chars = record.prompt_book.characters;
    ASSERT_EQ(chars.size(), 2u);
    EXPECT_LE(overlap_fraction(chars[0].bbox, chars[1].bbox), 0.25);
    EXPECT_EQ(chars[0].bbox.w, 200);
    EXPECT_FALSE(record.notes.empty());
}

TEST(Orchestrator, ReplayPreconditionsAndSingleTurn) {
    Pipeline p({{1, {kSingleBook}}});
    EXPECT_THROW(replay_session({}, p.deps(), run_config(10), "x"), ScriptError);
    const auto one = replay_session({"a box"}, p.deps(), run_config(10), "x");
    ASSERT_TRUE(one.ok());
    EXPECT_EQ(one.session.turns.size(), 1u);
    EXPECT_EQ(one.session.session_id, "x");
}

TEST(Orchestrator, SessionSeedDrivesTheImage) {
    Pipeline a({{1, {kSingleBook}}}), b({{1, {kSingleBook}}});
    DialogueSession s1{"s", 1, {}, {}}, s2{"s", 2, {}, {}};
    const auto r1 = run_turn(s1, "a box", a.deps(), run_config(10));
    const auto r2 = run_turn(s2, "a box", b.deps(), run_config(10));
    EXPECT_NE(r1.image_ref, r2.image_ref);
}

TEST(SessionRunner, RejectsAConcurrentTurn) {
    GateLlm gate(kSingleBook);
    Pipeline p({});
    PipelineDeps deps = p.deps();
    deps.llm = &gate;
    SessionRunner runner(DialogueSession{"r", 5, {}, {}});
    auto first = std::async(std::launch::async, [&] { return runner.run("a box", deps, run_config(10)); });
    gate.wait_entered();
    EXPECT_THROW(runner.run("another", deps, run_config(10)), TurnInFlight);
    EXPECT_TRUE(runner.snapshot().turns.empty());
    gate.open();
    EXPECT_EQ(first.get().index, 1);
    EXPECT_EQ(runner.snapshot().turns.size(), 1u);
    EXPECT_EQ(runner.run("again", deps, run_config(10)).index, 2);
}
