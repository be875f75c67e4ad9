// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "stagecraft/backends.hpp"
#include "stagecraft/benchkit.hpp"

namespace stagecraft {

// ---- metrics ---------------------------------------------------------------

using FeatureSet = std::vector<std::vector<double>>;

// Mean cosine of (crop, reference) embeddings, times 100. Throws NoPairs.
double accs(const std::vector<std::pair<Image, Image>>& pairs, const Embedder& embedder);
double mean_percent(const std::vector<double>& cosines);

// Mean text-image cosine, times 100. Throws LengthMismatch or NoPairs.
double atis(const std::vector<Image>& images, const std::vector<std::string>& prompts, const Embedder& embedder);

inline constexpr double kFidEpsilon = 1e-6;
inline constexpr std::size_t kSmallSampleSize = 10;

// Frechet distance between Gaussian fits of two feature sets (unbiased covariance).
// The epsilon ridge is added only when a covariance is numerically singular.
// Throws DegenerateSet for fewer than two vectors and DimensionMismatch.
double afid(const FeatureSet& a, const FeatureSet& b);

enum class Relation { Left, Right, Top, Down };

Relation relation_from_string(std::string_view text);  // throws UnknownRelation

// "a <relation> b", compared on box centers; equal centers fail.
bool check_spatial(const BoundingBox& a, const BoundingBox& b, Relation relation);
bool check_spatial(const BoundingBox& a, const BoundingBox& b, std::string_view relation);

bool check_attribute(const Image& crop, std::string_view old_prompt, std::string_view new_prompt,
                     const Embedder& embedder);

bool check_negative(const Image& image, std::string_view negative_prompt, const Detector& detector,
                    double box_threshold = 0.5);

bool check_numeracy(int detections, std::string_view expected_word);  // throws UnknownCountWord

int count_detections(const Image& image, std::string_view prompt, const Detector& detector,
                     double box_threshold = 0.5);

// ---- harness ---------------------------------------------------------------

struct CharacterCrop {
    int id = 0;
    int turn = 0;  // 1-based
    Image crop;
};

struct MissingCharacter {
    int id = 0;
    int turn = 0;
    std::string prompt;
};

struct ReferenceSet {
    std::map<int, CharacterCrop> references;  // earliest detected appearance per id
    std::vector<CharacterCrop> comparands;
    std::vector<MissingCharacter> missing;
};

ReferenceSet collect_references(const std::vector<Image>& turn_images, const BenchDialogue& dialogue,
                                const Detector& detector, const DetectionThresholds& thresholds = {});

struct AlignmentResult {
    EditType type = EditType::Spatial;
    int turn = 0;
    bool pass = false;
    std::string detail;
};

struct DialogueEval {
    std::string name;
    std::optional<double> accs;
    std::optional<double> atis;
    std::optional<double> afid;
    bool afid_small_sample = false;
    std::vector<AlignmentResult> alignment;
    int missing_detections = 0;
};

struct EvalOptions {
    bool accs = true;
    bool atis = true;
    bool afid = true;
    bool alignment = true;
    DetectionThresholds thresholds;
    unsigned threads = 0;  // 0 picks the hardware concurrency
};

EvalOptions eval_options_from_metrics(std::string_view comma_list);

struct EvalReport {
    std::vector<DialogueEval> dialogues;
    std::optional<double> accs;  // mean over dialogues that produced a value
    std::optional<double> atis;
    std::optional<double> afid;
    std::optional<double> afid_pooled;  // corpus-wide reference set vs comparand set
    bool afid_pooled_small_sample = false;
    std::map<std::string, std::pair<int, int>> alignment;  // type -> (passed, scored)
    int missing_detections = 0;
    EvalOptions options;

    nlohmann::ordered_json to_json() const;
};

// Loads the k-th turn image (1-based) of a named dialogue.
using TurnImageLoader = std::function<Image(const std::string& dialogue, int turn)>;

EvalReport evaluate_corpus(const BenchCorpus& corpus, BenchTask task, const TurnImageLoader& loader,
                           const Detector& detector, const Embedder& embedder, const EvalOptions& options = {});

// Reads <dir>/<dialogue name>/turn<k>.png.
TurnImageLoader directory_loader(std::filesystem::path dir);

}  // namespace stagecraft
