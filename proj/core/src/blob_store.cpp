// SPDX-License-Identifier: Apache-2.0

#include "stagecraft/blob_store.hpp"

#include <algorithm>

#include "stagecraft/errors.hpp"
#include "stagecraft/hashing.hpp"

namespace stagecraft {
namespace {

bool well_formed_key(const std::string& key) {
    return key.size() == 64 && std::all_of(key.begin(), key.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

}  // namespace

BlobStore::BlobStore(std::filesystem::path root) : root_(std::move(root)) {
    if (!root_.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(root_, ec);
        if (ec) throw IoError("cannot create blob directory " + root_.string() + ": " + ec.message());
    }
}

std::filesystem::path BlobStore::path_for(const std::string& key) const { return root_ / (key + ".png"); }

std::string BlobStore::put(const Bytes& bytes) {
    std::string key = sha256_hex(bytes);
    std::lock_guard lock(mutex_);
    if (cache_.count(key)) return key;
    if (!root_.empty() && !std::filesystem::exists(path_for(key))) {
        write_file_atomic(path_for(key), bytes);
    }
    cache_.emplace(key, bytes);
    return key;
}

std::optional<Bytes> BlobStore::get(const std::string& key) const {
    if (!well_formed_key(key)) return std::nullopt;
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    if (root_.empty() || !std::filesystem::exists(path_for(key))) return std::nullopt;
    Bytes bytes = read_file(path_for(key));
    cache_.emplace(key, bytes);
    return bytes;
}

bool BlobStore::contains(const std::string& key) const { return get(key).has_value(); }

std::size_t BlobStore::size() const {
    std::lock_guard lock(mutex_);
    if (root_.empty()) return cache_.size();
    std::size_t n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(root_)) {
        if (entry.path().extension() == ".png") ++n;
    }
    return n;
}

}  // namespace stagecraft
