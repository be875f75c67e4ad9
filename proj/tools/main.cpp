// SPDX-License-Identifier: Apache-2.0

#include <csignal>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

#include <stagecraft/benchkit.hpp>
#include <stagecraft/config.hpp>
#include <stagecraft/errors.hpp>
#include <stagecraft/evaluator.hpp>
#include <stagecraft/hashing.hpp>
#include <stagecraft/orchestrator.hpp>
#include <stagecraft/service.hpp>

#include "fixture_writer.hpp"

namespace fs = std::filesystem;
using namespace stagecraft;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kIo = 3, kPipeline = 4 };

void write_bytes(const fs::path& path, const Bytes& bytes) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    write_file_atomic(path, bytes);
}

void write_text(const fs::path& path, const std::string& text) {
    write_bytes(path, Bytes(text.begin(), text.end()));
}

// Defaults used when generate runs without --config: every backend is local and the
// LLM answers come from the script file itself.
StagecraftConfig local_config(const fs::path& script) {
    const std::string text = "llm: {kind: mock, script: \"" + script.string() + "\"}\n"
                             "diffusion: {kind: toy}\nvision: {kind: mock}\n";
    return parse_config(text, {});
}

std::vector<std::string> read_instructions(const fs::path& script) {
    if (!fs::exists(script)) throw IoError("script not found: " + script.string());
    YAML::Node root;
    try {
        root = YAML::LoadFile(script.string());
    } catch (const YAML::Exception& ex) {
        throw ScriptError("script " + script.string() + " is not valid YAML: " + ex.what());
    }
    if (!root["instructions"] || !root["instructions"].IsSequence()) {
        throw ScriptError("script " + script.string() + " has no 'instructions' list");
    }
    std::vector<std::string> out;
    for (const auto& n : root["instructions"]) out.push_back(n.as<std::string>());
    return out;
}

void write_session(const fs::path& out, const DialogueSession& session, const BlobStore& blobs) {
    fs::create_directories(out);
    for (const auto& turn : session.turns) {
        write_bytes(out / ("turn" + std::to_string(turn.index) + ".png"), *blobs.get(turn.image_ref));
        for (const auto& c : turn.characters) {
            const auto ref = out / "references" / (std::to_string(c.id) + ".png");
            if (!fs::exists(ref)) write_bytes(ref, *blobs.get(c.reference_ref));
        }
    }
    write_text(out / "session.json", dump_canonical(session_to_json(session)));
}

int run_generate(const fs::path& script, const fs::path& out, std::uint64_t seed,
                 const std::optional<fs::path>& config_path) {
    const StagecraftConfig config = config_path ? load_config(*config_path) : local_config(script);
    Backends backends = make_backends(config);
    GuidedRunConfig cfg = config.guided();
    cfg.seed = seed;
    ReferenceStore references;
    BlobStore blobs;
    PipelineDeps deps{backends.llm.get(), backends.diffusion.get(), backends.detector.get(),
                      backends.segmenter.get(), &references, &blobs};
    PipelineOptions options;
    options.max_retries = config.llm.max_retries;
    options.thresholds = config.vision.thresholds;
    const auto instructions = read_instructions(script);
    ReplayOutcome outcome = replay_session(instructions, deps, cfg, "generate", options);
    write_session(out, outcome.session, blobs);
    if (outcome.error) std::rethrow_exception(outcome.error);
    spdlog::info("wrote {} turns to {}", outcome.session.turns.size(), out.string());
    return kOk;
}

// Replays every dialogue of a corpus with its ground-truth prompt books standing in
// for the designer's answers; images land in <out>/<dialogue>/turn<k>.png.
int run_generate_corpus(const fs::path& corpus_path, const fs::path& out, std::uint64_t seed,
                        const std::optional<fs::path>& config_path) {
    StagecraftConfig config;
    if (config_path) config = load_config(*config_path);
    const BenchCorpus corpus = load_corpus(corpus_path);
    const auto diffusion = std::make_shared<const ToyDiffusionBackend>(config.diffusion.toy);
    PatternDetector::Options det_options;
    det_options.thresholds = config.vision.thresholds;
    const PatternDetector detector(diffusion, det_options);
    const BoxSegmenter segmenter;
    for (const auto& [name, dialogue] : corpus) {
        std::map<int, std::vector<std::string>> answers;
        std::vector<std::string> instructions;
        for (std::size_t t = 0; t < dialogue.turns.size(); ++t) {
            answers[static_cast<int>(t + 1)] = {serialize_prompt_book(turn_prompt_book(dialogue.turns[t]))};
            instructions.push_back(dialogue.turns[t].caption);
        }
        ScriptedLlmClient llm(std::move(answers));
        ReferenceStore references;
        BlobStore blobs;
        PipelineDeps deps{&llm, diffusion.get(), &detector, &segmenter, &references, &blobs};
        GuidedRunConfig cfg = config.guided();
        cfg.seed = derive_seed(seed, name, 0, 0);
        PipelineOptions options;
        options.thresholds = config.vision.thresholds;
        ReplayOutcome outcome = replay_session(instructions, deps, cfg, name, options);
        write_session(out / name, outcome.session, blobs);
        if (outcome.error) std::rethrow_exception(outcome.error);
        spdlog::info("{}: {} turns", name, outcome.session.turns.size());
    }
    return kOk;
}

HttpApi* g_api = nullptr;

int run_serve(const std::string& host, int port, const fs::path& config_path) {
    const StagecraftConfig config = load_config(config_path);
    SessionService service(make_backends(config), config);
    HttpApi api(service);
    const int bound = api.bind(host, port);
    if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    g_api = &api;
    std::signal(SIGINT, [](int) {
        if (g_api) g_api->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_api) g_api->stop();
    });
    std::cout << nlohmann::json{{"listening", host + ":" + std::to_string(bound)}}.dump() << std::endl;
    api.listen_after_bind();
    g_api = nullptr;
    return kOk;
}

int run_bench_build(const std::string& task, int count, std::uint64_t seed, const fs::path& out,
                    const std::optional<fs::path>& llm_script, const std::optional<fs::path>& config_path,
                    const std::optional<fs::path>& pools_file) {
    std::shared_ptr<LlmClient> llm;
    if (llm_script) {
        if (!fs::exists(*llm_script)) throw IoError("LLM script not found: " + llm_script->string());
        llm = std::make_shared<ScriptedLlmClient>(ScriptedLlmClient::from_file(llm_script->string()));
    } else if (config_path) {
        llm = make_backends(load_config(*config_path)).llm;
    } else {
        throw MissingConfigKey("llm.script");
    }
    const CharacterPools pools = pools_file ? CharacterPools::from_file(*pools_file) : CharacterPools::builtin();
    BuildOptions options;
    options.task = bench_task_from_string(task);
    options.count = count;
    options.seed = seed;
    const BuildResult result = build_corpus(pools, options, *llm);
    save_corpus(result.corpus, out);
    nlohmann::ordered_json summary = nlohmann::ordered_json::array();
    for (const auto& log : result.log) {
        summary.push_back({{"name", log.name},
                           {"attempts", log.attempts},
                           {"repair_edits", log.repair_edits},
                           {"box_moves", log.box_moves},
                           {"problems", log.problems}});
    }
    std::cout << summary.dump(2) << std::endl;
    spdlog::info("wrote {} dialogues to {}", result.corpus.size(), out.string());
    return kOk;
}

BenchTask infer_task(const BenchCorpus& corpus) {
    for (const auto& [name, d] : corpus) {
        if (d.scene != "empty background") return BenchTask::Story;
    }
    return BenchTask::Editing;
}

int run_bench_eval(const fs::path& generated, const fs::path& benchmark, const std::string& metrics,
                   const fs::path& report_path, const std::string& task, const std::optional<fs::path>& config_path) {
    DetectionThresholds thresholds;
    ToyDiffusionParams toy;
    if (config_path) {
        const auto config = load_config(*config_path);
        thresholds = config.vision.thresholds;
        toy = config.diffusion.toy;
    }
    if (!fs::is_directory(generated)) throw IoError("generated directory not found: " + generated.string());
    const BenchCorpus corpus = load_corpus(benchmark);
    const BenchTask bench_task = task == "auto" ? infer_task(corpus) : bench_task_from_string(task);
    const auto diffusion = std::make_shared<const ToyDiffusionBackend>(toy);
    PatternDetector::Options det_options;
    det_options.thresholds = thresholds;
    const PatternDetector detector(diffusion, det_options);
    const PatternEmbedder embedder(diffusion);
    EvalOptions options = eval_options_from_metrics(metrics);
    options.thresholds = thresholds;
    const EvalReport report =
        evaluate_corpus(corpus, bench_task, directory_loader(generated), detector, embedder, options);
    write_text(report_path, report.to_json().dump(2) + "\n");
    std::cout << report.to_json()["aggregate"].dump(2) << std::endl;
    return kOk;
}

int run_fixtures(const std::string& task, int count, std::uint64_t seed, const fs::path& out) {
    tools::FixtureOptions options;
    options.task = bench_task_from_string(task);
    options.count = count;
    options.seed = seed;
    const auto answers = tools::write_bench_answers(CharacterPools::builtin(), options);
    write_text(out, tools::answers_to_yaml(answers, "Scripted dialogue-writer answers for 'stagecraft bench build --task " +
                                                        task + " --count " + std::to_string(count) + " --seed " +
                                                        std::to_string(seed) + "'."));
    return kOk;
}

int report_error(int code, const char* kind, const std::string& message,
                 const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
    nlohmann::ordered_json j{{"error", kind}, {"message", message}, {"exit_code", code}};
    for (const auto& [k, v] : extra.items()) j[k] = v;
    std::cerr << j.dump() << std::endl;
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stagecraft: multi-turn layout-guided image generation"};
    app.require_subcommand(1);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

    std::optional<fs::path> config_path;
    std::uint64_t seed = 0;

    auto* generate = app.add_subcommand("generate", "Replay a scripted dialogue and write its images");
    fs::path script, out_dir;
    std::optional<fs::path> benchmark_corpus;
    generate->add_option("--script", script, "YAML script with instructions and designer answers");
    generate->add_option("--benchmark", benchmark_corpus, "Replay every dialogue of a corpus instead");
    generate->add_option("--out", out_dir, "Output directory")->required();
    generate->add_option("--seed", seed, "Session seed");
    generate->add_option("--config", config_path, "Backend config file (YAML or JSON)");

    auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
    int port = 8080;
    std::string host = "127.0.0.1";
    fs::path serve_config;
    serve->add_option("--port", port, "Port (0 picks a free one)");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--config", serve_config, "Backend config file")->required();

    auto* bench = app.add_subcommand("bench", "Benchmark corpus tools");
    bench->require_subcommand(1);
    auto* build = bench->add_subcommand("build", "Build a dialogue corpus");
    std::string task = "editing";
    int count = 20;
    fs::path corpus_out;
    std::optional<fs::path> llm_script, pools_file;
    build->add_option("--task", task, "story or editing")->required();
    build->add_option("--count", count, "Number of dialogues");
    build->add_option("--seed", seed, "Corpus seed");
    build->add_option("--out", corpus_out, "Corpus JSON file")->required();
    build->add_option("--llm-script", llm_script, "Scripted dialogue-writer answers");
    build->add_option("--config", config_path, "Config file supplying the llm backend");
    build->add_option("--pools", pools_file, "Character pool file (defaults to the built-in pools)");

    auto* eval = bench->add_subcommand("eval", "Score generated images against a corpus");
    fs::path generated, benchmark, report_path;
    std::string metrics = "accs,atis,afid,alignment";
    std::string eval_task = "auto";
    eval->add_option("--generated", generated, "Directory of <dialogue>/turn<k>.png")->required();
    eval->add_option("--benchmark", benchmark, "Corpus JSON file")->required();
    eval->add_option("--metrics", metrics, "Comma-separated subset of accs,atis,afid,alignment");
    eval->add_option("--report", report_path, "Report JSON output")->required();
    eval->add_option("--task", eval_task, "story, editing or auto");
    eval->add_option("--config", config_path, "Config file for the vision settings");

    auto* fixtures = app.add_subcommand("fixtures", "Write scripted dialogue-writer answers for bench build");
    fixtures->add_option("--task", task, "story or editing")->required();
    fixtures->add_option("--count", count, "Number of dialogues");
    fixtures->add_option("--seed", seed, "Corpus seed");
    fixtures->add_option("--out", corpus_out, "Output YAML file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return report_error(kConfig, "usage_error", e.what());
    }
    spdlog::set_default_logger(spdlog::stderr_color_mt("stagecraft"));
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (*generate) {
            if (benchmark_corpus) return run_generate_corpus(*benchmark_corpus, out_dir, seed, config_path);
            if (script.empty()) throw ConfigError("generate needs --script or --benchmark");
            return run_generate(script, out_dir, seed, config_path);
        }
        if (*serve) return run_serve(host, port, serve_config);
        if (*build) {
            return run_bench_build(task, count, seed, corpus_out, llm_script, config_path, pools_file);
        }
        if (*eval) return run_bench_eval(generated, benchmark, metrics, report_path, eval_task, config_path);
        if (*fixtures) return run_fixtures(task, count, seed, corpus_out);
    } catch (const MissingConfigKey& ex) {
        return report_error(kConfig, ex.kind(), ex.what(), {{"key", ex.key()}});
    } catch (const ConfigError& ex) {
        return report_error(kConfig, ex.kind(), ex.what());
    } catch (const IoError& ex) {
        return report_error(kIo, ex.kind(), ex.what());
    } catch (const DesignFailure& ex) {
        return report_error(kPipeline, ex.kind(), ex.what(), {{"transcripts", ex.transcripts()}});
    } catch (const BackendError& ex) {
        return report_error(kPipeline, ex.kind(), ex.what());
    } catch (const Error& ex) {
        return report_error(kOther, ex.kind(), ex.what());
    } catch (const std::exception& ex) {
        return report_error(kOther, "internal", ex.what());
    }
    return kOther;
}
