#include "ccotom/backend.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include <json.hpp>

#include "ccotom/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ccotom::backend {

std::string canonical_request_json(const BackendRequest& request) {
    json j;
    j["max_tokens"] = request.max_tokens;
    j["model"] = request.model;
    j["prompt"] = request.prompt;
    j["temperature"] = request.temperature;
    return j.dump();
}

std::string request_digest(const BackendRequest& request) {
    const std::string canonical = canonical_request_json(request);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(canonical.data(), canonical.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 digest failed");
    static const char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> script) : script_(std::move(script)) {}

BackendResponse ScriptedBackend::complete(const BackendRequest& request) {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        log_.push_back(request);
    }
    for (const auto& entry : script_) {
        const bool hit = entry.match == Match::Exact
                             ? request.prompt == entry.pattern
                             : request.prompt.find(entry.pattern) != std::string::npos;
        if (hit) {
            BackendResponse resp;
            resp.text = entry.response;
            return resp;
        }
    }
    throw NoScriptedMatch(request.prompt);
}

std::vector<BackendRequest> ScriptedBackend::requests() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return log_;
}

size_t ScriptedBackend::call_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return log_.size();
}

ResponseCache::ResponseCache(std::string dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
}

std::optional<BackendResponse> ResponseCache::lookup(const BackendRequest& request) const {
    const std::string digest = request_digest(request);
    const fs::path path = fs::path(dir_) / (digest + ".json");
    std::string raw;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        std::ifstream in(path, std::ios::binary);
        if (!in) return std::nullopt;
        std::ostringstream buf;
        buf << in.rdbuf();
        raw = buf.str();
    }
    json j;
    try {
        j = json::parse(raw);
    } catch (const json::exception&) {
        throw CacheCorrupt(path.string() + ": not valid json");
    }
    if (!j.contains("request") || !j.contains("response"))
        throw CacheCorrupt(path.string() + ": missing fields");
    const std::string stored_request = j["request"].dump();
    if (stored_request != canonical_request_json(request))
        throw CacheCorrupt(path.string() + ": stored request does not match");
    const auto& r = j["response"];
    BackendResponse resp;
    resp.text = r.value("text", std::string());
    resp.prompt_tokens = r.value("prompt_tokens", 0);
    resp.completion_tokens = r.value("completion_tokens", 0);
    return resp;
}

void ResponseCache::store(const BackendRequest& request, const BackendResponse& response) {
    const std::string digest = request_digest(request);
    json j;
    j["request"] = json::parse(canonical_request_json(request));
    j["response"] = {{"text", response.text},
                     {"prompt_tokens", response.prompt_tokens},
                     {"completion_tokens", response.completion_tokens}};
    const std::string payload = j.dump(2);

    static std::atomic<unsigned long> counter{0};
    const fs::path final_path = fs::path(dir_) / (digest + ".json");
    const fs::path tmp_path =
        fs::path(dir_) / (digest + ".tmp" + std::to_string(counter.fetch_add(1)));
    std::lock_guard<std::mutex> lock(mutex_);
    {
        std::ofstream out(tmp_path, std::ios::binary);
        if (!out) throw Error("cannot write cache file: " + tmp_path.string());
        out << payload;
    }
    fs::rename(tmp_path, final_path);
}

CachingBackend::CachingBackend(std::shared_ptr<Backend> inner, std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

BackendResponse CachingBackend::complete(const BackendRequest& request) {
    if (auto hit = cache_->lookup(request)) return *hit;
    BackendResponse resp = inner_->complete(request);
    cache_->store(request, resp);
    return resp;
}

std::string CachingBackend::name() const { return inner_->name() + "+cache"; }

}  // namespace ccotom::backend
