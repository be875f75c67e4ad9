// SPDX-License-Identifier: Apache-2.0

#include <yaml-cpp/yaml.h>

#include <httplib.h>

#include <algorithm>

#include "stagecraft/backends.hpp"
#include "stagecraft/errors.hpp"

namespace stagecraft {

ScriptedLlmClient::ScriptedLlmClient(std::map<int, std::vector<std::string>> responses)
    : responses_(std::move(responses)) {}

ScriptedLlmClient ScriptedLlmClient::from_text(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& ex) {
        throw ScriptError(std::string("cannot parse LLM script: ") + ex.what());
    }
    const YAML::Node& croot = root;  // non-const lookup would turn a sequence into a map
    YAML::Node table = (croot.IsMap() && croot["responses"]) ? croot["responses"] : croot;
    if (!table.IsMap()) {
        throw ScriptError("LLM script must map turn index to response text");
    }
    std::map<int, std::vector<std::string>> responses;
    for (const auto& item : table) {
        int turn = 0;
        try {
            turn = item.first.as<int>();
        } catch (const YAML::Exception&) {
            throw ScriptError("LLM script key '" + item.first.as<std::string>() + "' is not a turn index");
        }
        std::vector<std::string> answers;
        if (item.second.IsSequence()) {
            for (const auto& a : item.second) answers.push_back(a.as<std::string>());
        } else {
            answers.push_back(item.second.as<std::string>());
        }
        if (answers.empty()) {
            throw ScriptError("LLM script turn " + std::to_string(turn) + " has no responses");
        }
        responses[turn] = std::move(answers);
    }
    return ScriptedLlmClient(std::move(responses));
}

ScriptedLlmClient ScriptedLlmClient::from_file(const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::BadFile&) {
        throw IoError("cannot read LLM script " + path);
    } catch (const YAML::Exception& ex) {
        throw ScriptError("cannot parse LLM script " + path + ": " + ex.what());
    }
    return from_text(YAML::Dump(root));
}

std::string ScriptedLlmClient::complete(const std::string& prompt, const LlmParams& params) {
    std::lock_guard lock(*mutex_);
    prompts_.push_back(prompt);
    const auto it = responses_.find(params.turn_index);
    if (it == responses_.end()) {
        throw BackendError("no scripted response for turn " + std::to_string(params.turn_index));
    }
    const auto& answers = it->second;
    return answers[std::min<std::size_t>(static_cast<std::size_t>(std::max(0, params.attempt)), answers.size() - 1)];
}

HttpLlmClient::HttpLlmClient(std::string endpoint, int timeout_ms)
    : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {
    if (endpoint_.rfind("http://", 0) != 0) {
        throw ConfigError("llm.endpoint must be an http:// URL");
    }
}

std::string HttpLlmClient::complete(const std::string& prompt, const LlmParams& params) {
    const std::size_t scheme_end = endpoint_.find("://") + 3;
    const std::size_t path_start = endpoint_.find('/', scheme_end);
    const std::string origin = endpoint_.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : endpoint_.substr(path_start);
    httplib::Client client(origin);
    client.set_connection_timeout(0, timeout_ms_ * 1000);
    client.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
    httplib::Headers headers = {
        {"X-Temperature", std::to_string(params.temperature)},
        {"X-Seed", std::to_string(params.seed)},
        {"X-Max-Tokens", std::to_string(params.max_tokens)},
    };
    const auto res = client.Post(path, headers, prompt, "text/plain");
    if (!res) {
        throw BackendError("LLM endpoint unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw BackendError("LLM endpoint returned HTTP " + std::to_string(res->status));
    }
    return res->body;
}

}  // namespace stagecraft
