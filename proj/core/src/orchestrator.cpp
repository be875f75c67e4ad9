// SPDX-License-Identifier: Apache-2.0

#include "stagecraft/orchestrator.hpp"

#include <map>
#include <optional>

#include <spdlog/spdlog.h>

#include "stagecraft/errors.hpp"
#include "stagecraft/hashing.hpp"

namespace stagecraft {
namespace {

void check_deps(const PipelineDeps& deps) {
    if (!deps.llm || !deps.diffusion || !deps.detector || !deps.segmenter || !deps.references || !deps.blobs) {
        throw ConfigError("pipeline dependencies are incomplete");
    }
}

bool has_overlap(const PromptBook& book, const Canvas& canvas, double threshold) {
    for (const auto& v : validate(book, canvas, threshold)) {
        if (v.kind == ViolationKind::Overlap) return true;
    }
    return false;
}

// Everything a turn produces before it is allowed to touch shared state.
struct StagedTurn {
    TurnRecord record;
    std::vector<Bytes> blobs;
    std::vector<std::pair<int, std::pair<Bytes, std::string>>> new_references;
};

struct CharacterRender {
    std::string reference_ref;
    std::string onstage_ref;
    Cutout cutout;
};

}  // namespace

TurnRecord run_turn(DialogueSession& session, const std::string& instruction, const PipelineDeps& deps,
                    const GuidedRunConfig& cfg, const PipelineOptions& options) {
    check_deps(deps);
    check_config(cfg);
    const auto& backend = *deps.diffusion;
    const int index = static_cast<int>(session.turns.size()) + 1;
    const std::uint64_t turn_seed = derive_seed(session.seed, "turn", static_cast<std::uint64_t>(index), 0);

    StagedTurn staged;
    TurnRecord& record = staged.record;
    record.index = index;
    record.instruction = instruction;

    DesignOptions design;
    design.max_retries = options.max_retries;
    design.canvas = session.canvas;
    design.overlap_threshold = options.dispersion.threshold;
    design.seed = turn_seed;
    PromptBook book = design_turn(session.turns, instruction, *deps.llm, options.designer, design).book;

    if (has_overlap(book, session.canvas, options.dispersion.threshold)) {
        std::vector<BoundingBox> boxes;
        for (const auto& c : book.characters) boxes.push_back(c.bbox);
        const auto dispersed = disperse(boxes, session.canvas, derive_seed(turn_seed, "disperse", 0, 0),
                                        options.dispersion);
        for (std::size_t i = 0; i < boxes.size(); ++i) book.characters[i].bbox = dispersed.boxes[i];
        if (!dispersed.converged) {
            record.notes.push_back("layout dispersion did not converge; overlapping layout kept");
        } else {
            record.notes.push_back("layout dispersed in " + std::to_string(dispersed.iters_used) + " iterations");
        }
    }

    // One reference and one on-stage render per distinct id, shared by duplicate boxes.
    std::map<int, CharacterRender> renders;
    for (const auto& entry : book.characters) {
        if (renders.count(entry.id)) continue;
        const auto id = static_cast<std::uint64_t>(entry.id);
        std::optional<Bytes> stored = deps.references->find(session.session_id, entry.id);
        Image onstage;
        Bytes reference_png;
        if (stored) {
            reference_png = *stored;
            onstage = generate_onstage(entry, decode_png(reference_png), backend, cfg.steps,
                                       derive_seed(turn_seed, "onstage", id, 1));
        } else {
            reference_png = encode_png(create_reference(entry, backend, cfg.steps, derive_seed(session.seed, "ref", id, 0)));
            staged.new_references.push_back({entry.id, {reference_png, entry.prompt}});
            onstage = generate_onstage(entry, std::nullopt, backend, cfg.steps,
                                       derive_seed(turn_seed, "onstage", id, 0));
        }
        CharacterRender render;
        render.reference_ref = sha256_hex(reference_png);
        staged.blobs.push_back(reference_png);
        Bytes onstage_png = encode_png(onstage);
        render.onstage_ref = sha256_hex(onstage_png);
        staged.blobs.push_back(std::move(onstage_png));
        try {
            render.cutout = extract_cutout(onstage, entry.prompt, *deps.detector, *deps.segmenter, options.thresholds);
        } catch (const NoDetection&) {
            render.cutout = full_image_cutout(onstage);
            record.notes.push_back("no detection for '" + entry.prompt + "'; whole on-stage image used");
        }
        renders.emplace(entry.id, std::move(render));
        record.characters.push_back({entry.id, renders.at(entry.id).reference_ref, renders.at(entry.id).onstage_ref});
    }

    std::vector<Cutout> cutouts;
    cutouts.reserve(book.characters.size());
    for (const auto& entry : book.characters) cutouts.push_back(renders.at(entry.id).cutout);
    const int channels = backend.latent_template().channels();
    const MidStateImage mid = compose_midstate(cutouts, book.characters, session.canvas, kBlankFill, channels);

    GuidedRunConfig run_cfg = cfg;
    run_cfg.seed = derive_seed(turn_seed, "perform", 0, 0);
    run_cfg.canvas = session.canvas;
    const GuidanceBundle bundle = build_guidance(mid, backend, run_cfg.steps, derive_seed(turn_seed, "guide", 0, 0));
    Bytes image_png = encode_png(run_guided_generation(book, bundle, backend, run_cfg));
    record.image_ref = sha256_hex(image_png);
    staged.blobs.push_back(std::move(image_png));
    record.prompt_book = std::move(book);

    // Commit: blobs are content-addressed so re-putting is harmless; references are
    // checked again in case the store changed underneath us.
    for (const auto& [id, ref] : staged.new_references) {
        if (deps.references->contains(session.session_id, id)) {
            throw StoreError("reference for id " + std::to_string(id) + " appeared during the turn");
        }
    }
    for (const auto& blob : staged.blobs) deps.blobs->put(blob);
    for (const auto& [id, ref] : staged.new_references) {
        deps.references->put(session.session_id, id, ref.first, ref.second);
    }
    spdlog::debug("session {} turn {}: {} characters, {} new references", session.session_id, index,
                  record.prompt_book.characters.size(), staged.new_references.size());
    session.turns.push_back(record);
    return record;
}

ReplayOutcome replay_session(const std::vector<std::string>& script, const PipelineDeps& deps,
                             const GuidedRunConfig& cfg, const std::string& session_id,
                             const PipelineOptions& options) {
    if (script.empty()) throw ScriptError("replay script is empty");
    ReplayOutcome outcome;
    outcome.session.session_id = session_id;
    outcome.session.seed = cfg.seed;
    outcome.session.canvas = cfg.canvas;
    for (const auto& instruction : script) {
        try {
            run_turn(outcome.session, instruction, deps, cfg, options);
        } catch (...) {
            outcome.error = std::current_exception();
            break;
        }
    }
    return outcome;
}

TurnRecord SessionRunner::run(const std::string& instruction, const PipelineDeps& deps, const GuidedRunConfig& cfg,
                              const PipelineOptions& options) {
    std::unique_lock turn(turn_mutex_, std::try_to_lock);
    if (!turn.owns_lock()) {
        throw TurnInFlight("a turn is already running for session " + session_.session_id);
    }
    DialogueSession working;
    {
        std::lock_guard state(state_mutex_);
        working = session_;
    }
    TurnRecord record = run_turn(working, instruction, deps, cfg, options);
    std::lock_guard state(state_mutex_);
    session_ = std::move(working);
    return record;
}

DialogueSession SessionRunner::snapshot() const {
    std::lock_guard state(state_mutex_);
    return session_;
}

}  // namespace stagecraft
