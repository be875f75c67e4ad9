// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "stagecraft/blob_store.hpp"
#include "stagecraft/config.hpp"
#include "stagecraft/orchestrator.hpp"

namespace stagecraft {

struct SessionSettings {
    std::optional<std::uint64_t> seed;
    std::optional<int> steps;
    std::optional<double> ratio;
};

// Session registry behind the HTTP API. With a data directory, sessions live at
// <data>/sessions/<id>/session.json, blobs at <data>/blobs/<sha>.png and references
// under <data>/references; existing sessions are reloaded on construction.
class SessionService {
public:
    SessionService(Backends backends, StagecraftConfig config);

    std::string create_session(const SessionSettings& settings = {});
    TurnRecord submit_turn(const std::string& session_id, const std::string& instruction);
    DialogueSession session(const std::string& session_id) const;
    void delete_session(const std::string& session_id);
    std::optional<Bytes> image(const std::string& ref) const;
    std::vector<std::string> session_ids() const;

    static nlohmann::ordered_json turn_response(const TurnRecord& record);

private:
    struct Entry {
        std::shared_ptr<SessionRunner> runner;
        GuidedRunConfig cfg;
    };

    std::shared_ptr<Entry> entry(const std::string& session_id) const;
    void persist(const std::string& session_id, const DialogueSession& session, const GuidedRunConfig& cfg) const;
    void reload();
    std::filesystem::path session_dir(const std::string& session_id) const;

    Backends backends_;
    StagecraftConfig config_;
    ReferenceStore references_;
    BlobStore blobs_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::uint64_t counter_ = 0;
};

// JSON-over-HTTP front end for a SessionService.
class HttpApi {
public:
    explicit HttpApi(SessionService& service);
    ~HttpApi();
    HttpApi(const HttpApi&) = delete;
    HttpApi& operator=(const HttpApi&) = delete;

    // Binds to the port (0 picks a free one) and returns the bound port, or -1.
    int bind(const std::string& host, int port);
    // Blocks serving requests until stop() is called.
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace stagecraft
