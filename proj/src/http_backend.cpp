#include "ccotom/http_backend.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "ccotom/errors.hpp"

using nlohmann::json;

namespace ccotom::backend {

ParsedUrl parse_url(const std::string& url) {
    const size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("url lacks a scheme: " + url);
    const size_t path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    if (path_start == std::string::npos) {
        out.base = url;
        out.path = "/";
    } else {
        out.base = url.substr(0, path_start);
        out.path = url.substr(path_start);
    }
    if (out.base.size() == scheme_end + 3) throw ConfigError("url lacks a host: " + url);
    return out;
}

TokenBucket::TokenBucket(double per_minute, double capacity)
    : per_minute_(per_minute),
      capacity_(std::max(1.0, capacity)),
      tokens_(std::max(1.0, capacity)),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
    if (per_minute_ <= 0) return;
    const double per_second = per_minute_ / 60.0;
    std::chrono::steady_clock::duration wait{};
    {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto now = std::chrono::steady_clock::now();
        const double elapsed = std::chrono::duration<double>(now - last_).count();
        tokens_ = std::min(capacity_, tokens_ + elapsed * per_second);
        last_ = now;
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        const double deficit = 1.0 - tokens_;
        tokens_ = 0.0;
        wait = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(deficit / per_second));
        last_ += wait;
    }
    std::this_thread::sleep_for(wait);
}

HttpBackend::HttpBackend(HttpConfig config)
    : config_(std::move(config)),
      url_(parse_url(config_.url)),
      limiter_(config_.requests_per_minute) {}

namespace {

bool retryable_status(int status) {
    return status == 408 || status == 429 || (status >= 500 && status < 600);
}

bool timeoutish(httplib::Error err) {
    return err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
           err == httplib::Error::Write;
}

BackendResponse parse_completion(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception&) {
        throw ProviderError(200, body);
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
        throw ProviderError(200, body);
    const auto& first = j["choices"][0];
    if (!first.contains("message") || !first["message"].contains("content"))
        throw ProviderError(200, body);
    BackendResponse resp;
    resp.text = first["message"]["content"].get<std::string>();
    if (j.contains("usage")) {
        resp.prompt_tokens = j["usage"].value("prompt_tokens", 0);
        resp.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
    return resp;
}

}  // namespace

BackendResponse HttpBackend::complete(const BackendRequest& request) {
    json body;
    body["model"] = request.model;
    body["messages"] = json::array({json{{"role", "user"}, {"content", request.prompt}}});
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    const std::string payload = body.dump();

    int last_status = 0;
    std::string last_body;
    bool last_timeout = false;

    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        limiter_.acquire();
        httplib::Client client(url_.base);
        client.set_connection_timeout(std::chrono::milliseconds(config_.timeout_ms));
        client.set_read_timeout(std::chrono::milliseconds(config_.timeout_ms));
        client.set_write_timeout(std::chrono::milliseconds(config_.timeout_ms));
        if (!config_.api_key.empty()) client.set_bearer_token_auth(config_.api_key);

        auto res = client.Post(url_.path, payload, "application/json");
        if (res && res->status == 200) return parse_completion(res->body);

        bool retryable;
        if (!res) {
            last_status = 0;
            last_body = httplib::to_string(res.error());
            last_timeout = timeoutish(res.error());
            retryable = true;
        } else {
            last_status = res->status;
            last_body = res->body;
            last_timeout = false;
            retryable = retryable_status(res->status);
        }
        if (!retryable || attempt == config_.max_retries) break;

        long delay = config_.retry_base_ms;
        for (int i = 0; i < attempt; ++i) delay = std::min<long>(delay * 2, config_.retry_max_ms);
        delay = std::min<long>(delay, config_.retry_max_ms);
        std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }

    if (last_timeout) throw TimeoutError(last_body);
    throw ProviderError(last_status, last_body);
}

namespace {

std::shared_ptr<Backend> wrap_cache(std::shared_ptr<Backend> inner, const json& config) {
    const std::string cache_dir = config.value("cache_dir", std::string());
    if (cache_dir.empty()) return inner;
    return std::make_shared<CachingBackend>(std::move(inner),
                                            std::make_shared<ResponseCache>(cache_dir));
}

}  // namespace

BackendHandle make_backend(const json& config) {
    const std::string type = config.value("type", std::string());
    BackendHandle handle;
    handle.model = config.value("model", std::string("default"));
    if (type == "scripted") {
        std::vector<ScriptEntry> script;
        for (const auto& row : config.value("script", json::array())) {
            ScriptEntry entry;
            const std::string match = row.value("match", std::string("substring"));
            if (match == "exact") entry.match = Match::Exact;
            else if (match == "substring") entry.match = Match::Substring;
            else throw ConfigError("unknown script match kind: " + match);
            entry.pattern = row.value("pattern", std::string());
            entry.response = row.value("response", std::string());
            script.push_back(std::move(entry));
        }
        handle.backend = wrap_cache(std::make_shared<ScriptedBackend>(std::move(script)), config);
        return handle;
    }
    if (type == "http") {
        HttpConfig http;
        http.url = config.value("url", std::string());
        if (http.url.empty()) throw ConfigError("http backend config lacks url");
        const std::string key_env = config.value("api_key_env", std::string());
        if (!key_env.empty()) {
            if (const char* key = std::getenv(key_env.c_str())) http.api_key = key;
        }
        http.timeout_ms = config.value("timeout_ms", http.timeout_ms);
        http.max_retries = config.value("max_retries", http.max_retries);
        http.retry_base_ms = config.value("retry_base_ms", http.retry_base_ms);
        http.retry_max_ms = config.value("retry_max_ms", http.retry_max_ms);
        http.requests_per_minute = config.value("requests_per_minute", http.requests_per_minute);
        handle.backend = wrap_cache(std::make_shared<HttpBackend>(std::move(http)), config);
        return handle;
    }
    throw ConfigError("backend config needs type \"http\" or \"scripted\"");
}

BackendHandle load_backend(const std::string& config_path) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw ConfigError("cannot read backend config: " + config_path);
    json config;
    try {
        in >> config;
    } catch (const json::exception& e) {
        throw ConfigError("backend config is not valid json: " + std::string(e.what()));
    }
    return make_backend(config);
}

}  // namespace ccotom::backend
