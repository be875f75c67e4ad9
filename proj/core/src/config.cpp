// SPDX-License-Identifier: Apache-2.0

#include "stagecraft/config.hpp"

#include <cstdlib>

#include <yaml-cpp/yaml.h>

#include "stagecraft/errors.hpp"
#include "text_util.hpp"

namespace stagecraft {
namespace {

class Reader {
public:
    Reader(YAML::Node root, const EnvLookup& env) : root_(std::move(root)), env_(env) {}

    std::optional<YAML::Node> find(const std::string& key) const {
        if (env_) {
            if (auto value = env_(env_name_for(key))) return YAML::Load(*value);
        }
        YAML::Node node = YAML::Clone(root_);
        std::size_t start = 0;
        while (true) {
            const auto dot = key.find('.', start);
            const std::string part = key.substr(start, dot - start);
            if (!node.IsMap() || !node[part]) return std::nullopt;
            node = node[part];
            if (dot == std::string::npos) break;
            start = dot + 1;
        }
        if (node.IsNull()) return std::nullopt;
        return node;
    }

    template <typename T>
    T get(const std::string& key, T fallback) const {
        auto node = find(key);
        return node ? convert<T>(*node, key) : fallback;
    }

    template <typename T>
    T require(const std::string& key) const {
        auto node = find(key);
        if (!node) throw MissingConfigKey(key);
        return convert<T>(*node, key);
    }

private:
    template <typename T>
    static T convert(const YAML::Node& node, const std::string& key) {
        try {
            return node.as<T>();
        } catch (const YAML::Exception&) {
            throw ConfigError("config key '" + key + "' has the wrong type");
        }
    }

    YAML::Node root_;
    const EnvLookup& env_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
    std::filesystem::path p(value);
    return (p.is_relative() && !base.empty()) ? base / p : p;
}

void check_kind(const std::string& key, const std::string& value, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed) {
        if (value == a) return;
    }
    throw ConfigError("config key '" + key + "' has unsupported value '" + value + "'");
}

}  // namespace

GuidedRunConfig StagecraftConfig::guided() const {
    GuidedRunConfig g;
    g.steps = run.steps;
    g.ratio = run.ratio;
    g.seed = run.seed;
    g.canvas = diffusion.toy.canvas;
    return g;
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str())) return std::string(v);
        return std::nullopt;
    };
}

std::string env_name_for(const std::string& key) {
    std::string out = "STAGECRAFT_";
    for (char c : key) out += (c == '.') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

StagecraftConfig parse_config(const std::string& text, const std::filesystem::path& base_dir, const EnvLookup& env) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& ex) {
        throw ConfigError(std::string("config is not valid YAML/JSON: ") + ex.what());
    }
    if (!root.IsMap() && !root.IsNull()) throw ConfigError("config root must be a mapping");
    const Reader r(root, env);
    StagecraftConfig c;

    c.llm.kind = r.require<std::string>("llm.kind");
    check_kind("llm.kind", c.llm.kind, {"mock", "http"});
    if (c.llm.kind == "mock") {
        c.llm.script = resolve(base_dir, r.require<std::string>("llm.script"));
    } else {
        c.llm.endpoint = r.require<std::string>("llm.endpoint");
    }
    c.llm.timeout_ms = r.get<int>("llm.timeout_ms", c.llm.timeout_ms);
    c.llm.max_retries = r.get<int>("llm.max_retries", c.llm.max_retries);

    c.diffusion.kind = r.require<std::string>("diffusion.kind");
    check_kind("diffusion.kind", c.diffusion.kind, {"toy", "http"});
    if (c.diffusion.kind == "http") c.diffusion.endpoint = r.require<std::string>("diffusion.endpoint");
    auto& toy = c.diffusion.toy;
    toy.canvas.width = r.get<int>("diffusion.canvas", toy.canvas.width);
    toy.canvas.height = toy.canvas.width;
    toy.latent_factor = r.get<int>("diffusion.latent_factor", toy.latent_factor);
    toy.channels = r.get<int>("diffusion.channels", toy.channels);
    toy.pattern_seed = r.get<std::uint64_t>("diffusion.pattern_seed", toy.pattern_seed);
    toy.denoise_rate = r.get<double>("diffusion.denoise_rate", toy.denoise_rate);
    toy.lineart_pull = r.get<double>("diffusion.lineart_pull", toy.lineart_pull);
    toy.negative_weight = r.get<double>("diffusion.negative_weight", toy.negative_weight);
    toy.adapter_scale = r.get<double>("diffusion.adapter_scale", toy.adapter_scale);

    c.vision.kind = r.require<std::string>("vision.kind");
    check_kind("vision.kind", c.vision.kind, {"mock", "http"});
    if (c.vision.kind == "http") c.vision.endpoint = r.require<std::string>("vision.endpoint");
    c.vision.thresholds.box = r.get<double>("vision.box_threshold", c.vision.thresholds.box);
    c.vision.thresholds.text = r.get<double>("vision.text_threshold", c.vision.thresholds.text);

    c.run.steps = r.get<int>("run.steps", c.run.steps);
    c.run.ratio = r.get<double>("run.ratio", c.run.ratio);
    c.run.seed = r.get<std::uint64_t>("run.seed", c.run.seed);
    if (auto dir = r.find("data.dir")) c.data_dir = resolve(base_dir, dir->as<std::string>());

    check_config(c.guided());
    return c;
}

StagecraftConfig load_config(const std::filesystem::path& path, const EnvLookup& env) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    const Bytes bytes = read_file(path);
    return parse_config(std::string(bytes.begin(), bytes.end()), path.parent_path(), env);
}

Backends make_backends(const StagecraftConfig& config) {
    Backends b;
    if (config.diffusion.kind != "toy") {
        throw ConfigError("diffusion.kind 'http' has no adapter in this build; use 'toy'");
    }
    if (config.vision.kind != "mock") {
        throw ConfigError("vision.kind 'http' has no adapter in this build; use 'mock'");
    }
    auto diffusion = std::make_shared<const ToyDiffusionBackend>(config.diffusion.toy);
    b.diffusion = diffusion;
    PatternDetector::Options options;
    options.thresholds = config.vision.thresholds;
    b.detector = std::make_shared<const PatternDetector>(diffusion, options);
    b.segmenter = std::make_shared<const BoxSegmenter>();
    b.embedder = std::make_shared<const PatternEmbedder>(diffusion);
    if (config.llm.kind == "mock") {
        b.llm = std::make_shared<ScriptedLlmClient>(ScriptedLlmClient::from_file(config.llm.script.string()));
    } else {
        b.llm = std::make_shared<HttpLlmClient>(config.llm.endpoint, config.llm.timeout_ms);
    }
    return b;
}

}  // namespace stagecraft
