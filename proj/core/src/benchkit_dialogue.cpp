// SPDX-License-Identifier: Apache-2.0

#include <map>
#include <regex>
#include <set>

#include <spdlog/spdlog.h>

#include "stagecraft/benchkit.hpp"
#include "stagecraft/hashing.hpp"
#include "text_util.hpp"

namespace stagecraft {

const char* to_string(DialogueViolationKind kind) {
    switch (kind) {
        case DialogueViolationKind::TurnCount: return "TURN_COUNT";
        case DialogueViolationKind::TypeOrder: return "TYPE_ORDER";
        case DialogueViolationKind::IdContinuity: return "ID_CONTINUITY";
        case DialogueViolationKind::OutOfBounds: return "OUT_OF_BOUNDS";
    }
    return "UNKNOWN";
}

const char* to_string(EditType type) {
    switch (type) {
        case EditType::Spatial: return "spatial";
        case EditType::Attribute: return "attribute";
        case EditType::Negative: return "negative";
        case EditType::Numeracy: return "numeracy";
    }
    return "unknown";
}

std::uint64_t dialogue_seed(std::uint64_t corpus_seed, int index) {
    return derive_seed(corpus_seed, "dialogue", static_cast<std::uint64_t>(index), 0);
}

namespace {

std::optional<EditType> tagged_type(const std::string& caption) {
    static const std::regex tag(R"(^\s*\[\s*(spacial|spatial|attribute|negative|numeracy)\s+round\s*\])",
                                std::regex::icase);
    std::smatch m;
    if (!std::regex_search(caption, m, tag)) return std::nullopt;
    const std::string word = detail::lower(m[1].str());
    if (word == "attribute") return EditType::Attribute;
    if (word == "negative") return EditType::Negative;
    if (word == "numeracy") return EditType::Numeracy;
    return EditType::Spatial;
}

std::map<int, std::string> prompts_by_id(const BenchTurn& turn) {
    std::map<int, std::string> out;
    for (const auto& o : turn.objects) out.emplace(o.id, o.prompt);
    return out;
}

EditType inferred_type(const BenchTurn* prev, const BenchTurn& cur) {
    std::map<int, int> counts;
    for (const auto& o : cur.objects) ++counts[o.id];
    for (const auto& [id, n] : counts) {
        if (n > 1) return EditType::Numeracy;
    }
    const auto now = prompts_by_id(cur);
    if (!normalize_negative(cur.negative).empty()) return EditType::Negative;
    if (!prev) return EditType::Spatial;
    const auto before = prompts_by_id(*prev);
    for (const auto& [id, prompt] : before) {
        if (!now.count(id)) return EditType::Negative;
    }
    bool same_ids = before.size() == now.size();
    bool prompt_changed = false;
    for (const auto& [id, prompt] : now) {
        auto it = before.find(id);
        if (it == before.end()) {
            same_ids = false;
        } else if (it->second != prompt) {
            prompt_changed = true;
        }
    }
    return (same_ids && prompt_changed) ? EditType::Attribute : EditType::Spatial;
}

std::string head_stem(const std::string& prompt) { return noun_stem(head_noun(prompt)); }

}  // namespace

std::vector<EditType> infer_edit_types(const BenchDialogue& d) {
    std::vector<EditType> out;
    for (std::size_t t = 0; t < d.turns.size(); ++t) {
        const auto tag = tagged_type(d.turns[t].caption);
        out.push_back(tag ? *tag : inferred_type(t ? &d.turns[t - 1] : nullptr, d.turns[t]));
    }
    return out;
}

std::vector<DialogueViolation> validate_dialogue(const BenchDialogue& d, BenchTask task, const Canvas& canvas) {
    std::vector<DialogueViolation> out;
    if (d.turns.size() != 4) {
        out.push_back({DialogueViolationKind::TurnCount, 0,
                       "dialogue has " + std::to_string(d.turns.size()) + " turns, expected 4"});
    }
    if (task == BenchTask::Editing) {
        static const EditType order[] = {EditType::Spatial, EditType::Attribute, EditType::Negative,
                                         EditType::Numeracy};
        const auto types = infer_edit_types(d);
        for (std::size_t t = 0; t < types.size() && t < 4; ++t) {
            if (types[t] != order[t]) {
                out.push_back({DialogueViolationKind::TypeOrder, static_cast<int>(t + 1),
                               std::string("turn is a ") + to_string(types[t]) + " round, expected " +
                                   to_string(order[t])});
            }
        }
    }
    std::map<int, std::string> last_prompt;  // id -> most recent prompt
    int max_seen = 0;
    for (std::size_t t = 0; t < d.turns.size(); ++t) {
        const int turn_no = static_cast<int>(t + 1);
        std::map<int, std::string> here;
        for (const auto& o : d.turns[t].objects) {
            if (!o.bbox.inside(canvas)) {
                out.push_back({DialogueViolationKind::OutOfBounds, turn_no, "'" + o.prompt + "' leaves the canvas"});
            }
            if (o.id < 1) {
                out.push_back({DialogueViolationKind::IdContinuity, turn_no, "id " + std::to_string(o.id) + " < 1"});
                continue;
            }
            auto [it, inserted] = here.emplace(o.id, o.prompt);
            if (!inserted && it->second != o.prompt) {
                out.push_back({DialogueViolationKind::IdContinuity, turn_no,
                               "id " + std::to_string(o.id) + " names two different objects"});
            }
        }
        int turn_max = max_seen;
        for (const auto& [id, prompt] : here) {
            auto prev = last_prompt.find(id);
            if (prev == last_prompt.end()) {
                if (id <= max_seen) {
                    out.push_back({DialogueViolationKind::IdContinuity, turn_no,
                                   "new object '" + prompt + "' reuses retired id " + std::to_string(id)});
                }
                turn_max = std::max(turn_max, id);
            } else if (head_stem(prev->second) != head_stem(prompt)) {
                out.push_back({DialogueViolationKind::IdContinuity, turn_no,
                               "id " + std::to_string(id) + " changes from '" + prev->second + "' to '" + prompt +
                                   "'"});
            }
        }
        max_seen = turn_max;
        for (const auto& [id, prompt] : here) last_prompt[id] = prompt;
    }
    return out;
}

CorrectionResult correct_dialogue(const BenchDialogue& d, double overlap_threshold, std::uint64_t seed,
                                  const DispersionParams& params) {
    CorrectionResult result{d, {}};
    DispersionParams p = params;
    p.threshold = overlap_threshold;
    for (std::size_t t = 0; t < result.dialogue.turns.size(); ++t) {
        auto& turn = result.dialogue.turns[t];
        const int turn_no = static_cast<int>(t + 1);
        const auto violations = validate(turn_prompt_book(turn), {}, overlap_threshold);
        const bool leak = std::any_of(violations.begin(), violations.end(),
                                      [](const Violation& v) { return v.kind == ViolationKind::BackgroundLeak; });
        if (leak) result.report.background_leak_turns.push_back(turn_no);

        std::vector<BoundingBox> boxes;
        for (const auto& o : turn.objects) boxes.push_back(o.bbox);
        bool dispersion_failed = false;
        if (boxes.size() > 1 && max_pairwise_overlap(boxes) > overlap_threshold) {
            const auto dispersed = disperse(boxes, {}, derive_seed(seed, "correct", static_cast<std::uint64_t>(t), 0), p);
            if (dispersed.converged) {
                for (std::size_t i = 0; i < boxes.size(); ++i) {
                    const auto& nb = dispersed.boxes[i];
                    if (nb == boxes[i]) continue;
                    result.report.moves.push_back({turn_no, i, nb.x - boxes[i].x, nb.y - boxes[i].y});
                    turn.objects[i].bbox = nb;
                }
            } else {
                dispersion_failed = true;
            }
        }
        if (leak || dispersion_failed) result.report.regenerate_turns.push_back(turn_no);
    }
    return result;
}

BuildResult build_corpus(const CharacterPools& pools, const BuildOptions& options, LlmClient& llm) {
    if (options.count < 0) throw ConfigError("corpus count must be non-negative");
    if (options.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
    BuildResult result;
    for (int k = 1; k <= options.count; ++k) {
        const std::uint64_t seed = dialogue_seed(options.seed, k);
        const Selection selection = sample_characters(pools, options.task, seed);
        const std::string prompt = build_bench_prompt(selection);
        DialogueBuildLog log;
        log.name = "dialogue " + std::to_string(k);
        std::optional<BenchDialogue> fallback;
        bool accepted = false;
        for (int attempt = 0; attempt < options.max_attempts && !accepted; ++attempt) {
            ++log.attempts;
            LlmParams params;
            params.seed = derive_seed(seed, "llm", static_cast<std::uint64_t>(attempt), 0);
            params.turn_index = k;
            params.attempt = attempt;
            params.max_tokens = 4096;
            const std::string raw = llm.complete(prompt, params);
            try {
                RepairResult repaired = repair_format(raw, options.repair);
                CorrectionResult corrected =
                    correct_dialogue(repaired.dialogue, options.overlap_threshold, derive_seed(seed, "fix", 0, 0));
                const auto violations = validate_dialogue(corrected.dialogue, options.task);
                log.repair_edits = repaired.total_edits();
                log.box_moves = corrected.report.moves.size();
                log.problems.clear();
                for (const auto& v : violations) {
                    log.problems.push_back(std::string(to_string(v.kind)) + " turn " + std::to_string(v.turn) + ": " +
                                           v.message);
                }
                for (int t : corrected.report.regenerate_turns) {
                    log.problems.push_back("REGENERATE turn " + std::to_string(t));
                }
                accepted = log.problems.empty();
                fallback = std::move(corrected.dialogue);
            } catch (const RepairFailure& ex) {
                log.problems = {std::string("REPAIR_FAILURE: ") + ex.what()};
            }
        }
        if (fallback) {
            result.corpus.emplace_back(log.name, std::move(*fallback));
        } else {
            spdlog::warn("{}: no usable answer after {} attempts", log.name, log.attempts);
        }
        result.log.push_back(std::move(log));
    }
    return result;
}

}  // namespace stagecraft
