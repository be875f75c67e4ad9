// SPDX-License-Identifier: Apache-2.0

#include <nlohmann/json.hpp>

#include <fstream>

#include "stagecraft/errors.hpp"
#include "stagecraft/hashing.hpp"
#include "stagecraft/rehearsal.hpp"

namespace stagecraft {

namespace fs = std::filesystem;

ReferenceStore::ReferenceStore(fs::path root) : root_(std::move(root)) {}

fs::path ReferenceStore::session_dir(const std::string& session) const { return root_ / session; }

std::optional<Bytes> ReferenceStore::find(const std::string& session, int id) const {
    std::lock_guard lock(mutex_);
    if (const auto it = cache_.find({session, id}); it != cache_.end()) return it->second;
    if (root_.empty()) return std::nullopt;
    const fs::path file = session_dir(session) / (std::to_string(id) + ".png");
    std::error_code ec;
    if (!fs::exists(file, ec)) return std::nullopt;
    Bytes bytes = read_file(file);
    cache_[{session, id}] = bytes;
    return bytes;
}

void ReferenceStore::put(const std::string& session, int id, const Bytes& png, const std::string& prompt) {
    if (contains(session, id)) {
        throw StoreError("reference for character " + std::to_string(id) + " already exists in session " + session);
    }
    std::lock_guard lock(mutex_);
    if (!root_.empty()) {
        const fs::path dir = session_dir(session);
        try {
            write_file_atomic(dir / (std::to_string(id) + ".png"), png);
            nlohmann::ordered_json index = nlohmann::ordered_json::object();
            const fs::path index_file = dir / "index.json";
            if (fs::exists(index_file)) {
                std::ifstream in(index_file);
                index = nlohmann::ordered_json::parse(in);
            }
            index[std::to_string(id)] = {{"file", std::to_string(id) + ".png"},
                                         {"sha256", sha256_hex(std::span<const std::uint8_t>(png))},
                                         {"prompt", prompt}};
            const std::string text = index.dump(2) + "\n";
            write_file_atomic(index_file, std::span<const std::uint8_t>(
                                              reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
        } catch (const IoError& ex) {
            throw StoreError(std::string("cannot persist reference: ") + ex.what());
        } catch (const nlohmann::json::exception& ex) {
            throw StoreError(std::string("corrupt reference index: ") + ex.what());
        }
    }
    cache_[{session, id}] = png;
}

std::size_t ReferenceStore::count(const std::string& session) const {
    std::lock_guard lock(mutex_);
    if (!root_.empty()) {
        std::size_t n = 0;
        std::error_code ec;
        for (const auto& entry : fs::directory_iterator(session_dir(session), ec)) {
            if (entry.path().extension() == ".png") ++n;
        }
        return n;
    }
    std::size_t n = 0;
    for (const auto& [key, value] : cache_) n += key.first == session ? 1 : 0;
    return n;
}

void ReferenceStore::erase_session(const std::string& session) {
    std::lock_guard lock(mutex_);
    for (auto it = cache_.begin(); it != cache_.end();) {
        it = it->first.first == session ? cache_.erase(it) : std::next(it);
    }
    if (!root_.empty()) {
        std::error_code ec;
        fs::remove_all(session_dir(session), ec);
    }
}

}  // namespace stagecraft
