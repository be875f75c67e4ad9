// SPDX-License-Identifier: Apache-2.0

#include "stagecraft/service.hpp"

#include <cstdio>

#include <spdlog/spdlog.h>

#include "stagecraft/errors.hpp"
#include "stagecraft/hashing.hpp"

namespace stagecraft {
namespace {

std::filesystem::path sub(const std::filesystem::path& root, const char* name) {
    return root.empty() ? std::filesystem::path{} : root / name;
}

bool valid_session_id(const std::string& id) {
    return !id.empty() && id.size() <= 64 && std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
    });
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace

SessionService::SessionService(Backends backends, StagecraftConfig config)
    : backends_(std::move(backends)),
      config_(std::move(config)),
      references_(sub(config_.data_dir, "references")),
      blobs_(sub(config_.data_dir, "blobs")) {
    if (!backends_.llm || !backends_.diffusion || !backends_.detector || !backends_.segmenter) {
        throw ConfigError("session service needs llm, diffusion, detector and segmenter backends");
    }
    reload();
}

std::filesystem::path SessionService::session_dir(const std::string& session_id) const {
    return config_.data_dir / "sessions" / session_id;
}

void SessionService::reload() {
    if (config_.data_dir.empty()) return;
    const auto root = config_.data_dir / "sessions";
    if (!std::filesystem::exists(root)) return;
    for (const auto& dir : std::filesystem::directory_iterator(root)) {
        const auto file = dir.path() / "session.json";
        if (!std::filesystem::exists(file)) continue;
        const Bytes bytes = read_file(file);
        const auto j = nlohmann::ordered_json::parse(bytes.begin(), bytes.end());
        DialogueSession s = session_from_json(j);
        GuidedRunConfig cfg = config_.guided();
        cfg.seed = s.seed;
        cfg.canvas = s.canvas;
        const auto meta_file = dir.path() / "meta.json";
        if (std::filesystem::exists(meta_file)) {
            const Bytes mb = read_file(meta_file);
            const auto meta = nlohmann::json::parse(mb.begin(), mb.end());
            cfg.steps = meta.value("steps", cfg.steps);
            cfg.ratio = meta.value("ratio", cfg.ratio);
        }
        const std::string id = s.session_id;
        auto e = std::make_shared<Entry>(Entry{std::make_shared<SessionRunner>(std::move(s)), cfg});
        sessions_.emplace(id, std::move(e));
        ++counter_;
    }
    spdlog::info("reloaded {} sessions from {}", sessions_.size(), root.string());
}

void SessionService::persist(const std::string& session_id, const DialogueSession& session,
                             const GuidedRunConfig& cfg) const {
    if (config_.data_dir.empty()) return;
    const auto dir = session_dir(session_id);
    std::filesystem::create_directories(dir);
    write_text(dir / "session.json", dump_canonical(session_to_json(session)));
    nlohmann::ordered_json meta{{"steps", cfg.steps}, {"ratio", cfg.ratio}};
    write_text(dir / "meta.json", meta.dump(2) + "\n");
}

std::string SessionService::create_session(const SessionSettings& settings) {
    GuidedRunConfig cfg = config_.guided();
    if (settings.steps) cfg.steps = *settings.steps;
    if (settings.ratio) cfg.ratio = *settings.ratio;
    check_config(cfg);
    DialogueSession s;
    s.seed = settings.seed.value_or(config_.run.seed);
    s.canvas = cfg.canvas;
    cfg.seed = s.seed;
    std::lock_guard lock(mutex_);
    do {
        char buf[24];
        std::snprintf(buf, sizeof buf, "s%016llx",
                      static_cast<unsigned long long>(derive_seed(s.seed, "session", counter_++, sessions_.size())));
        s.session_id = buf;
    } while (sessions_.count(s.session_id) ||
             (!config_.data_dir.empty() && std::filesystem::exists(session_dir(s.session_id))));
    persist(s.session_id, s, cfg);
    const std::string id = s.session_id;
    sessions_.emplace(id, std::make_shared<Entry>(Entry{std::make_shared<SessionRunner>(std::move(s)), cfg}));
    return id;
}

std::shared_ptr<SessionService::Entry> SessionService::entry(const std::string& session_id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw NotFound("unknown session '" + session_id + "'");
    return it->second;
}

TurnRecord SessionService::submit_turn(const std::string& session_id, const std::string& instruction) {
    auto e = entry(session_id);
    PipelineDeps deps{backends_.llm.get(), backends_.diffusion.get(), backends_.detector.get(),
                      backends_.segmenter.get(), &references_, &blobs_};
    PipelineOptions options;
    options.max_retries = config_.llm.max_retries;
    options.thresholds = config_.vision.thresholds;
    TurnRecord record = e->runner->run(instruction, deps, e->cfg, options);
    std::lock_guard lock(mutex_);
    if (sessions_.count(session_id)) persist(session_id, e->runner->snapshot(), e->cfg);
    return record;
}

DialogueSession SessionService::session(const std::string& session_id) const {
    return entry(session_id)->runner->snapshot();
}

void SessionService::delete_session(const std::string& session_id) {
    std::lock_guard lock(mutex_);
    if (!sessions_.erase(session_id)) throw NotFound("unknown session '" + session_id + "'");
    references_.erase_session(session_id);
    if (!config_.data_dir.empty() && valid_session_id(session_id)) {
        std::error_code ec;
        std::filesystem::remove_all(session_dir(session_id), ec);
    }
}

std::optional<Bytes> SessionService::image(const std::string& ref) const { return blobs_.get(ref); }

std::vector<std::string> SessionService::session_ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, e] : sessions_) ids.push_back(id);
    return ids;
}

nlohmann::ordered_json SessionService::turn_response(const TurnRecord& record) {
    nlohmann::ordered_json j;
    j["turn_index"] = record.index;
    j["prompt_book"] = prompt_book_to_json(record.prompt_book, record.instruction);
    j["image_url"] = "/images/" + record.image_ref;
    auto& chars = j["character_images"] = nlohmann::ordered_json::array();
    for (const auto& c : record.characters) {
        chars.push_back({{"id", c.id},
                         {"reference_url", "/images/" + c.reference_ref},
                         {"onstage_url", "/images/" + c.onstage_ref}});
    }
    auto& layout = j["layout"] = nlohmann::ordered_json::array();
    for (const auto& c : record.prompt_book.characters) {
        layout.push_back({{"id", c.id}, {"prompt", c.prompt}, {"bbox", {c.bbox.x, c.bbox.y, c.bbox.w, c.bbox.h}}});
    }
    j["notes"] = record.notes;
    return j;
}

}  // namespace stagecraft
