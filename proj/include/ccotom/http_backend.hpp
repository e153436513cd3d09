#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

#include "ccotom/backend.hpp"

namespace ccotom::backend {

/// Splits a url into the scheme://host[:port] base httplib wants and the
/// request path. A url without a path gets "/".
struct ParsedUrl {
    std::string base;
    std::string path;
};
ParsedUrl parse_url(const std::string& url);

/// Blocking rate limiter: acquire() returns immediately while tokens remain
/// and otherwise sleeps until the refill allows the next request.
class TokenBucket {
public:
    explicit TokenBucket(double per_minute, double capacity = 1.0);
    void acquire();
    bool enabled() const { return per_minute_ > 0; }

private:
    double per_minute_;
    double capacity_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mutex_;
};

struct HttpConfig {
    std::string url;
    std::string api_key;  // sent as a bearer token when non-empty
    int timeout_ms = 30000;
    int max_retries = 3;
    int retry_base_ms = 250;
    int retry_max_ms = 4000;
    double requests_per_minute = 0;  // 0 = unlimited
};

/// Chat-completions client. Sends the prompt as a single user message,
/// retries transport errors and retryable statuses with exponential backoff.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpConfig config);

    BackendResponse complete(const BackendRequest& request) override;
    std::string name() const override { return "http"; }

    const HttpConfig& config() const { return config_; }

private:
    HttpConfig config_;
    ParsedUrl url_;
    TokenBucket limiter_;
};

/// A backend built from a JSON config plus the default model name requests
/// should carry.
struct BackendHandle {
    std::shared_ptr<Backend> backend;
    std::string model;
};

/// Builds a backend from config. type "scripted" yields a ScriptedBackend
/// fed from the "script" array; type "http" yields an HttpBackend. A
/// non-empty "cache_dir" wraps either in a CachingBackend.
BackendHandle make_backend(const nlohmann::json& config);
BackendHandle load_backend(const std::string& config_path);

}  // namespace ccotom::backend
