// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <exception>
#include <mutex>
#include <string>
#include <vector>

#include "stagecraft/backends.hpp"
#include "stagecraft/blob_store.hpp"
#include "stagecraft/layout.hpp"
#include "stagecraft/performance.hpp"
#include "stagecraft/rehearsal.hpp"
#include "stagecraft/screenwriter.hpp"
#include "stagecraft/session.hpp"

namespace stagecraft {

struct PipelineDeps {
    LlmClient* llm = nullptr;
    const DiffusionBackend* diffusion = nullptr;
    const Detector* detector = nullptr;
    const Segmenter* segmenter = nullptr;
    ReferenceStore* references = nullptr;
    BlobStore* blobs = nullptr;
};

struct PipelineOptions {
    DesignerTemplate designer = DesignerTemplate::standard();
    int max_retries = 3;
    DispersionParams dispersion;
    DetectionThresholds thresholds;
};

// Runs design, dispersion, rehearsal and guided generation for one instruction and
// appends the resulting record. Nothing is written to the stores and nothing is
// appended unless every stage succeeds. Per-turn seeds derive from session.seed;
// cfg.seed is ignored in favour of the session seed.
TurnRecord run_turn(DialogueSession& session, const std::string& instruction, const PipelineDeps& deps,
                    const GuidedRunConfig& cfg, const PipelineOptions& options = {});

struct ReplayOutcome {
    DialogueSession session;
    std::exception_ptr error;  // set when a turn failed; session holds the turns before it
    bool ok() const { return !error; }
};

ReplayOutcome replay_session(const std::vector<std::string>& script, const PipelineDeps& deps,
                             const GuidedRunConfig& cfg, const std::string& session_id,
                             const PipelineOptions& options = {});

// Owns one session and admits a single turn at a time; a concurrent caller gets
// TurnInFlight instead of waiting.
class SessionRunner {
public:
    explicit SessionRunner(DialogueSession session) : session_(std::move(session)) {}

    TurnRecord run(const std::string& instruction, const PipelineDeps& deps, const GuidedRunConfig& cfg,
                   const PipelineOptions& options = {});
    DialogueSession snapshot() const;

private:
    DialogueSession session_;
    std::mutex turn_mutex_;
    mutable std::mutex state_mutex_;
};

}  // namespace stagecraft
