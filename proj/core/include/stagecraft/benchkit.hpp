// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "stagecraft/backends.hpp"
#include "stagecraft/errors.hpp"
#include "stagecraft/layout.hpp"
#include "stagecraft/promptbook.hpp"

namespace stagecraft {

enum class BenchTask { Story, Editing };

const char* to_string(BenchTask task);
BenchTask bench_task_from_string(std::string_view text);

// ---- pools -----------------------------------------------------------------

struct CharacterPools {
    std::vector<std::string> fruit;
    std::vector<std::string> object;
    std::vector<std::string> animal;
    std::vector<std::string> human;
    std::vector<std::string> background;

    static CharacterPools builtin();
    static CharacterPools from_json(const nlohmann::json& j);
    static CharacterPools from_file(const std::filesystem::path& path);

    // Throws ConfigError on an empty pool or a duplicate inside one pool.
    void check() const;
};

const std::vector<std::string>& number_choices();
const std::vector<std::string>& relation_choices();

struct Selection {
    BenchTask task = BenchTask::Story;
    std::vector<std::string> characters;
    std::string scene;
    std::optional<std::string> number_pick;
    std::optional<std::string> relation_pick;
};

Selection sample_characters(const CharacterPools& pools, BenchTask task, std::uint64_t seed);

// ---- prompt templates ------------------------------------------------------

std::string build_story_prompt(const Selection& selection);
std::string build_editing_prompt(const Selection& selection);
std::string build_bench_prompt(const Selection& selection);

// ---- dialogue schema -------------------------------------------------------

struct BenchTurn {
    std::string caption;
    std::vector<CharacterEntry> objects;
    std::string background;
    std::string negative = "None";
    friend bool operator==(const BenchTurn&, const BenchTurn&) = default;
};

struct BenchDialogue {
    std::vector<std::string> characters;
    std::string scene;
    bool scene_as_list = false;  // story corpora write the scene as a one-element list
    std::vector<BenchTurn> turns;
    friend bool operator==(const BenchDialogue&, const BenchDialogue&) = default;
};

using BenchCorpus = std::vector<std::pair<std::string, BenchDialogue>>;

nlohmann::ordered_json dialogue_to_json(const BenchDialogue& d);
// Strict reader: exact field names and types. Throws ParseError.
BenchDialogue dialogue_from_json(const nlohmann::ordered_json& j);
std::string serialize_dialogue(const BenchDialogue& d);

nlohmann::ordered_json corpus_to_json(const BenchCorpus& corpus);
BenchCorpus corpus_from_json(const nlohmann::ordered_json& j);
BenchCorpus load_corpus(const std::filesystem::path& path);
void save_corpus(const BenchCorpus& corpus, const std::filesystem::path& path);

PromptBook turn_prompt_book(const BenchTurn& turn);

// ---- format repair ---------------------------------------------------------

struct RepairOptions {
    bool extract_payload = true;
    bool normalize_punctuation = true;
    bool tuples_to_lists = true;
    bool balance_brackets = true;
    bool insert_missing_commas = true;
    bool strip_trailing_commas = true;
    bool disambiguate_text_lists = true;
};

struct RepairResult {
    BenchDialogue dialogue;
    std::vector<RepairPassReport> passes;
    int total_edits() const;
};

// Runs the enabled passes in declaration order and strict-parses the result.
// Throws RepairFailure with the per-pass tallies when parsing still fails.
RepairResult repair_format(const std::string& raw, const RepairOptions& options = {});

// ---- automated correction --------------------------------------------------

struct BoxMove {
    int turn = 0;  // 1-based
    std::size_t object = 0;
    int dx = 0;
    int dy = 0;
};

struct CorrectionReport {
    std::vector<BoxMove> moves;
    std::vector<int> background_leak_turns;
    std::vector<int> regenerate_turns;  // dispersion failed or background leak found
    bool empty() const { return moves.empty() && regenerate_turns.empty(); }
    bool needs_regeneration() const { return !regenerate_turns.empty(); }
};

struct CorrectionResult {
    BenchDialogue dialogue;
    CorrectionReport report;
};

CorrectionResult correct_dialogue(const BenchDialogue& d, double overlap_threshold = kDefaultOverlapThreshold,
                                  std::uint64_t seed = 0, const DispersionParams& params = {});

// ---- validation ----------------------------------------------------------

enum class DialogueViolationKind { TurnCount, TypeOrder, IdContinuity, OutOfBounds };

const char* to_string(DialogueViolationKind kind);

struct DialogueViolation {
    DialogueViolationKind kind;
    int turn = 0;  // 0 when the violation concerns the whole dialogue
    std::string message;
};

enum class EditType { Spatial, Attribute, Negative, Numeracy };

const char* to_string(EditType type);

// An explicit "[... Round]" caption tag wins; otherwise the type is inferred from
// how the turn differs from the previous one.
std::vector<EditType> infer_edit_types(const BenchDialogue& d);

std::vector<DialogueViolation> validate_dialogue(const BenchDialogue& d, BenchTask task,
                                                 const Canvas& canvas = {});

// ---- corpus construction ---------------------------------------------------

struct BuildOptions {
    BenchTask task = BenchTask::Editing;
    int count = 20;
    std::uint64_t seed = 0;
    int max_attempts = 3;
    double overlap_threshold = kDefaultOverlapThreshold;
    RepairOptions repair;
};

struct DialogueBuildLog {
    std::string name;
    int attempts = 0;
    int repair_edits = 0;
    std::size_t box_moves = 0;
    std::vector<std::string> problems;  // empty when the dialogue was accepted cleanly
};

struct BuildResult {
    BenchCorpus corpus;
    std::vector<DialogueBuildLog> log;
};

// Dialogue k (1-based) is requested with LlmParams.turn_index = k; a rejected
// answer is retried with attempt + 1 until max_attempts is reached.
BuildResult build_corpus(const CharacterPools& pools, const BuildOptions& options, LlmClient& llm);

std::uint64_t dialogue_seed(std::uint64_t corpus_seed, int index);

}  // namespace stagecraft
