// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "stagecraft/png_io.hpp"

namespace stagecraft {

// Content-addressed byte store keyed by sha256 hex. With an empty root the blobs
// stay in memory; otherwise each one is written to <root>/<key>.png.
class BlobStore {
public:
    explicit BlobStore(std::filesystem::path root = {});

    std::string put(const Bytes& bytes);
    std::optional<Bytes> get(const std::string& key) const;
    bool contains(const std::string& key) const;
    std::size_t size() const;

private:
    std::filesystem::path path_for(const std::string& key) const;

    std::filesystem::path root_;
    mutable std::mutex mutex_;
    mutable std::map<std::string, Bytes> cache_;
};

}  // namespace stagecraft
