// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "stagecraft/backends.hpp"
#include "stagecraft/performance.hpp"

namespace stagecraft {

struct LlmSettings {
    std::string kind;  // mock | http
    std::filesystem::path script;
    std::string endpoint;
    int timeout_ms = 30000;
    int max_retries = 3;
};

struct DiffusionSettings {
    std::string kind;  // toy | http
    ToyDiffusionParams toy;
    std::string endpoint;
};

struct VisionSettings {
    std::string kind;  // mock | http
    DetectionThresholds thresholds;
    std::string endpoint;
};

struct RunSettings {
    int steps = 50;
    double ratio = 0.1;
    std::uint64_t seed = 0;
};

struct StagecraftConfig {
    LlmSettings llm;
    DiffusionSettings diffusion;
    VisionSettings vision;
    RunSettings run;
    std::filesystem::path data_dir;

    GuidedRunConfig guided() const;
};

// Reads an environment variable; replaceable for tests.
using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;
EnvLookup process_env();

// Variable for a dotted key: "llm.script" -> "STAGECRAFT_LLM_SCRIPT".
std::string env_name_for(const std::string& key);

// YAML or JSON file. Every key may be overridden through the environment; the
// three backend kinds are required and so are the sub-keys each kind needs.
// Throws ConfigError naming the offending key. Relative paths resolve against the
// config file's directory.
StagecraftConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_env());
StagecraftConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                              const EnvLookup& env = process_env());

struct Backends {
    std::shared_ptr<LlmClient> llm;
    std::shared_ptr<const ToyDiffusionBackend> diffusion;
    std::shared_ptr<const Detector> detector;
    std::shared_ptr<const Segmenter> segmenter;
    std::shared_ptr<const Embedder> embedder;
};

Backends make_backends(const StagecraftConfig& config);

}  // namespace stagecraft
