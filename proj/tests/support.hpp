// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <unistd.h>

#include <cmath>
#include <map>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include <stagecraft/backends.hpp>
#include <stagecraft/blob_store.hpp>
#include <stagecraft/geometry.hpp>
#include <stagecraft/hashing.hpp>
#include <stagecraft/orchestrator.hpp>
#include <stagecraft/promptbook.hpp>
#include <stagecraft/rehearsal.hpp>

namespace testsupport {

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(STAGECRAFT_FIXTURE_DIR) / name;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::shared_ptr<const stagecraft::ToyDiffusionBackend> toy_backend() {
    static auto backend = std::make_shared<const stagecraft::ToyDiffusionBackend>();
    return backend;
}

// A scripted dialogue fixture: the user instructions and the designer's answer per turn.
struct DialogueScript {
    std::vector<std::string> instructions;
    std::map<int, std::vector<std::string>> responses;
};

inline DialogueScript load_script(const std::string& name) {
    const YAML::Node root = YAML::LoadFile(fixture(name).string());
    DialogueScript script;
    for (const auto& n : root["instructions"]) script.instructions.push_back(n.as<std::string>());
    for (const auto& kv : root["responses"]) script.responses[kv.first.as<int>()] = {kv.second.as<std::string>()};
    return script;
}

// Every dependency of the turn pipeline, wired to the desk-scale backends.
struct Pipeline {
    explicit Pipeline(std::map<int, std::vector<std::string>> responses, std::filesystem::path ref_root = {},
                      std::filesystem::path blob_root = {})
        : llm(std::move(responses)), detector(toy_backend()), references(std::move(ref_root)),
          blobs(std::move(blob_root)) {}

    stagecraft::PipelineDeps deps() {
        return {&llm, toy_backend().get(), &detector, &segmenter, &references, &blobs};
    }

    stagecraft::ScriptedLlmClient llm;
    stagecraft::PatternDetector detector;
    stagecraft::BoxSegmenter segmenter;
    stagecraft::ReferenceStore references;
    stagecraft::BlobStore blobs;
};

inline stagecraft::GuidedRunConfig run_config(int steps = 50, double ratio = 0.1) {
    stagecraft::GuidedRunConfig cfg;
    cfg.steps = steps;
    cfg.ratio = ratio;
    return cfg;
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("stagecraft_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Pearson correlation computed directly from the sums.
inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
        saa += a[i] * a[i];
        sbb += b[i] * b[i];
        sab += a[i] * b[i];
    }
    const double cov = sab - sa * sb / n;
    const double va = saa - sa * sa / n;
    const double vb = sbb - sb * sb / n;
    return cov / std::sqrt(va * vb);
}

template <typename T>
std::vector<double> as_vector(const stagecraft::Raster<T>& r) {
    return std::vector<double>(r.values().begin(), r.values().end());
}

// Hand-rolled generators for the property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    bool coin() { return integer(0, 1) == 1; }

    template <typename C>
    const auto& one_of(const C& c) {
        return c[static_cast<std::size_t>(integer(0, static_cast<int>(c.size()) - 1))];
    }

    stagecraft::BoundingBox box(const stagecraft::Canvas& canvas, int min_side = 8, int max_side = 300) {
        const int w = integer(min_side, std::min(max_side, canvas.width));
        const int h = integer(min_side, std::min(max_side, canvas.height));
        return {integer(0, canvas.width - w), integer(0, canvas.height - h), w, h};
    }

    std::string phrase() {
        static const std::vector<std::string> adj{"tiny", "blue", "old", "shiny", "quiet", "red", "wooden"};
        static const std::vector<std::string> noun{"sparrow", "pen", "spatula", "lion", "box", "cherry", "mouse"};
        std::string p = one_of(adj) + " " + one_of(noun);
        if (integer(0, 5) == 0) p += " \"quoted\"";
        if (integer(0, 7) == 0) p += " back\\slash";
        if (integer(0, 7) == 0) p += " it's";
        return (std::string("aeiou").find(p[0]) != std::string::npos ? "an " : "a ") + p;
    }

    stagecraft::PromptBook book(const stagecraft::Canvas& canvas, int max_chars = 5) {
        stagecraft::PromptBook b;
        const int n = integer(0, max_chars);
        for (int i = 0; i < n; ++i) b.characters.push_back({integer(1, 9), phrase(), box(canvas)});
        static const std::vector<std::string> bg{"A silent library", "empty background", "a realistic scene",
                                                 "a sunny park"};
        b.background_prompt = one_of(bg);
        b.negative_prompt = coin() ? "" : phrase();
        return b;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

}  // namespace testsupport
