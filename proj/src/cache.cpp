#include "symscope/cache.hpp"

#include "symscope/errors.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace symscope {

namespace {

bool valid_fingerprint(const std::string& fp) {
    if (fp.empty() || fp.size() > 64) return false;
    for (char c : fp) {
        bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
        if (!ok) return false;
    }
    return true;
}

} // namespace

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) {
        throw io_error("cannot create cache directory " + dir_.string() + ": " + ec.message());
    }
}

std::filesystem::path ResponseCache::entry_path(const std::string& fingerprint) const {
    return dir_ / (fingerprint + ".json");
}

void ResponseCache::put(const ResponseCacheEntry& entry) {
    if (!valid_fingerprint(entry.request_fingerprint)) {
        throw validation_error("cache entry has malformed fingerprint '" + entry.request_fingerprint + "'");
    }
    nlohmann::json j;
    j["participant_id"] = entry.participant_id;
    j["model_id"] = entry.model_id;
    j["request_fingerprint"] = entry.request_fingerprint;
    j["raw_reply"] = entry.raw_reply;
    j["timestamp"] = entry.timestamp;

    std::lock_guard<std::mutex> lock(write_mutex_);
    // Write to a temp name then rename: a reader never observes a torn file.
    auto final_path = entry_path(entry.request_fingerprint);
    auto tmp_path = final_path;
    tmp_path += ".tmp";
    {
        std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot open cache file " + tmp_path.string());
        out << j.dump(2) << '\n';
        if (!out) throw io_error("short write to cache file " + tmp_path.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp_path, final_path, ec);
    if (ec) throw io_error("cannot finalize cache file " + final_path.string() + ": " + ec.message());
}

std::optional<ResponseCacheEntry> ResponseCache::get(const std::string& fingerprint) const {
    auto path = entry_path(fingerprint);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("corrupt cache file " + path.string() + ": " + e.what());
    }
    ResponseCacheEntry entry;
    try {
        entry.participant_id = j.at("participant_id").get<std::string>();
        entry.model_id = j.at("model_id").get<std::string>();
        entry.request_fingerprint = j.at("request_fingerprint").get<std::string>();
        entry.raw_reply = j.at("raw_reply").get<std::string>();
        entry.timestamp = j.at("timestamp").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("cache file " + path.string() + " missing field: " + e.what());
    }
    if (entry.request_fingerprint != fingerprint) {
        throw validation_error("cache file " + path.string() + " fingerprint mismatch");
    }
    return entry;
}

bool ResponseCache::contains(const std::string& fingerprint) const {
    return std::filesystem::exists(entry_path(fingerprint));
}

} // namespace symscope
