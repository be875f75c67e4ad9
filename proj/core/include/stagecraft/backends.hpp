// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stagecraft/geometry.hpp"
#include "stagecraft/raster.hpp"

namespace stagecraft {

// ---------------------------------------------------------------- diffusion

struct NoiseSchedule {
    std::vector<double> alphas_cum;  // index t = 0 is clean, t = T-1 is pure noise

    static NoiseSchedule linear(int steps);
    int steps() const { return static_cast<int>(alphas_cum.size()); }
};

// Standard-normal sample for one step of the seeded stream, shaped like `shape`.
LatentRaster noise_sample(const LatentRaster& shape, int t, std::uint64_t seed);

// sqrt(abar) * x0 + sqrt(1 - abar) * eps, elementwise.
LatentRaster diffuse_with(const LatentRaster& x0, const LatentRaster& eps, double alpha_cum);

// diffuse_with at abar_t, with eps keyed by (seed, t, element index).
LatentRaster forward_diffuse(const LatentRaster& x0, int t, const NoiseSchedule& schedule, std::uint64_t seed);

struct Conditioning {
    std::string prompt;
    std::string negative_prompt;
    std::optional<LatentRaster> lineart;         // single channel at latent resolution
    std::optional<Image> adapter_reference;      // reference image for identity injection
};

class DiffusionBackend {
public:
    using StepHook = std::function<void(int t, LatentRaster& z)>;

    virtual ~DiffusionBackend() = default;

    virtual Canvas canvas() const = 0;
    virtual LatentRaster latent_template() const = 0;  // zero raster with the latent shape
    virtual LatentRaster encode(const Image& image) const = 0;
    virtual Image decode(const LatentRaster& latent) const = 0;
    virtual LatentRaster denoise_step(const LatentRaster& z, int t, const Conditioning& cond) const = 0;

    // Starts from the seeded noise at index steps-1 and walks t down to 0. The hook runs
    // on z_t before each step (and once on z_0), so it can substitute latents in place.
    virtual Image generate(const Conditioning& cond, int steps, std::uint64_t seed, const StepHook& hook = {}) const;
};

struct ToyDiffusionParams {
    Canvas canvas{512, 512};
    int latent_factor = 8;       // image pixels per latent cell along each axis
    int channels = 3;
    int pattern_tiles = 8;       // prompt patterns are piecewise constant on a tiles x tiles grid
    double pattern_scale = 0.5;  // standard deviation of pattern values
    std::uint64_t pattern_seed = 0;
    double denoise_rate = 0.06;
    double lineart_pull = 0.01;
    double negative_weight = 0.25;
    double adapter_scale = 0.3;  // weight of the encoded reference in the adapter target
};

LatentRaster prompt_target(std::string_view prompt, int width, int height, int channels, std::uint64_t seed,
                           int tiles = 8, double scale = 0.5);

std::string normalize_prompt(std::string_view prompt);

class ToyDiffusionBackend final : public DiffusionBackend {
public:
    explicit ToyDiffusionBackend(ToyDiffusionParams params = {});

    Canvas canvas() const override { return params_.canvas; }
    LatentRaster latent_template() const override;
    LatentRaster encode(const Image& image) const override;
    Image decode(const LatentRaster& latent) const override;
    LatentRaster denoise_step(const LatentRaster& z, int t, const Conditioning& cond) const override;
    Image generate(const Conditioning& cond, int steps, std::uint64_t seed, const StepHook& hook = {}) const override;

    // z + rate * (target - z) + pull * lineart * (1 - z); lineart broadcasts over channels.
    static LatentRaster toy_update(const LatentRaster& z, const LatentRaster& target, const LatentRaster* lineart,
                                   double rate, double pull);

    LatentRaster target(std::string_view prompt) const;
    LatentRaster conditioned_target(const Conditioning& cond) const;
    const ToyDiffusionParams& params() const { return params_; }
    int latent_width() const { return params_.canvas.width / params_.latent_factor; }
    int latent_height() const { return params_.canvas.height / params_.latent_factor; }

private:
    void check_lineart(const Conditioning& cond) const;

    ToyDiffusionParams params_;
};

// ---------------------------------------------------------------- vision

struct Detection {
    BoundingBox box;
    double confidence = 0.0;
    friend bool operator==(const Detection&, const Detection&) = default;
};

struct DetectionThresholds {
    double box = 0.5;
    double text = 0.25;
};

class Detector {
public:
    virtual ~Detector() = default;
    // Detections sorted by descending confidence, in the input image's pixel frame.
    virtual std::vector<Detection> detect(const Image& image, std::string_view text) const = 0;
};

class Segmenter {
public:
    virtual ~Segmenter() = default;
    // Binary mask over the whole image selecting the object inside `box`.
    virtual Mask segment(const Image& image, const BoundingBox& box, std::string_view text) const = 0;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<double> embed_image(const Image& image) const = 0;
    virtual std::vector<double> embed_text(std::string_view text) const = 0;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

// Scripted detections keyed by normalized prompt text; returned verbatim.
class RuleTableDetector final : public Detector {
public:
    void set(std::string_view text, std::vector<Detection> detections);
    std::vector<Detection> detect(const Image& image, std::string_view text) const override;

private:
    std::map<std::string, std::vector<Detection>> rules_;
};

// Finds windows whose content correlates with the prompt's procedural pattern.
class PatternDetector final : public Detector {
public:
    struct Options {
        DetectionThresholds thresholds;
        int min_window = 6;      // in latent cells
        int coarse_stride = 2;
        int max_seeds = 16;
        double nms_iou = 0.5;
    };

    explicit PatternDetector(std::shared_ptr<const ToyDiffusionBackend> backend);
    PatternDetector(std::shared_ptr<const ToyDiffusionBackend> backend, Options options);
    std::vector<Detection> detect(const Image& image, std::string_view text) const override;

private:
    std::shared_ptr<const ToyDiffusionBackend> backend_;
    Options options_;
};

class BoxSegmenter final : public Segmenter {
public:
    Mask segment(const Image& image, const BoundingBox& box, std::string_view text) const override;
};

// Block-mean features; text embeddings are image embeddings of the decoded prompt pattern.
class PatternEmbedder final : public Embedder {
public:
    explicit PatternEmbedder(std::shared_ptr<const ToyDiffusionBackend> backend, int grid = 8);
    std::vector<double> embed_image(const Image& image) const override;
    std::vector<double> embed_text(std::string_view text) const override;

private:
    std::shared_ptr<const ToyDiffusionBackend> backend_;
    int grid_;
};

double box_iou(const BoundingBox& a, const BoundingBox& b);

// ---------------------------------------------------------------- language model

struct LlmParams {
    double temperature = 0.0;
    std::uint64_t seed = 0;
    int max_tokens = 1024;
    int turn_index = 1;  // 1-based request slot, used by scripted clients
    int attempt = 0;     // 0-based retry counter within the slot
};

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string complete(const std::string& prompt, const LlmParams& params) = 0;
};

// Replays fixed responses: slot k answers with responses[k][attempt], repeating the last one.
class ScriptedLlmClient final : public LlmClient {
public:
    ScriptedLlmClient() = default;
    explicit ScriptedLlmClient(std::map<int, std::vector<std::string>> responses);

    // Accepts YAML or JSON: either {responses: {k: text | [text...]}} or the bare map.
    static ScriptedLlmClient from_file(const std::string& path);
    static ScriptedLlmClient from_text(const std::string& text);

    std::string complete(const std::string& prompt, const LlmParams& params) override;
    const std::vector<std::string>& prompts() const { return prompts_; }

private:
    std::map<int, std::vector<std::string>> responses_;
    std::vector<std::string> prompts_;
    std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
};

// Plain-text completion over HTTP: POST the prompt, read the body back.
class HttpLlmClient final : public LlmClient {
public:
    HttpLlmClient(std::string endpoint, int timeout_ms);
    std::string complete(const std::string& prompt, const LlmParams& params) override;

private:
    std::string endpoint_;
    int timeout_ms_;
};

}  // namespace stagecraft
