#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

namespace symscope {

// One cached model reply, stored byte-exact as received. Keyed by a
// fingerprint that is a pure function of (prompt, decoding config,
// model_id), so any change to the request produces a distinct entry.
struct ResponseCacheEntry {
    std::string participant_id;
    std::string model_id;
    std::string request_fingerprint;
    std::string raw_reply;
    std::string timestamp;
};

// Directory-backed cache, one JSON file per fingerprint. Writes are
// serialized internally (single-writer contract); reads are lock-free on
// the filesystem.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    void put(const ResponseCacheEntry& entry);
    std::optional<ResponseCacheEntry> get(const std::string& fingerprint) const;
    bool contains(const std::string& fingerprint) const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path entry_path(const std::string& fingerprint) const;

    std::filesystem::path dir_;
    mutable std::mutex write_mutex_;
};

} // namespace symscope
