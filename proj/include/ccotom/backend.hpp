#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace ccotom::backend {

struct BackendRequest {
    std::string model;
    std::string prompt;
    double temperature = 0.0;
    int max_tokens = 512;

    bool operator==(const BackendRequest&) const = default;
};

struct BackendResponse {
    std::string text;
    int prompt_tokens = 0;
    int completion_tokens = 0;

    bool operator==(const BackendResponse&) const = default;
};

/// Canonical JSON form of a request: compact, keys sorted, temperature kept
/// as its exact decimal rendering. Equal requests serialize byte-identically.
std::string canonical_request_json(const BackendRequest& request);

/// SHA-256 of the canonical form, as 64 lowercase hex characters. This is the
/// cache key.
std::string request_digest(const BackendRequest& request);

class Backend {
public:
    virtual ~Backend() = default;
    virtual BackendResponse complete(const BackendRequest& request) = 0;
    virtual std::string name() const = 0;
};

enum class Match { Exact, Substring };

struct ScriptEntry {
    Match match = Match::Substring;
    std::string pattern;
    std::string response;
};

/// Deterministic stand-in for a provider: answers each prompt with the first
/// script entry that matches, records every request it sees.
class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(std::vector<ScriptEntry> script);

    BackendResponse complete(const BackendRequest& request) override;
    std::string name() const override { return "scripted"; }

    std::vector<BackendRequest> requests() const;
    size_t call_count() const;

private:
    std::vector<ScriptEntry> script_;
    mutable std::mutex mutex_;
    std::vector<BackendRequest> log_;
};

/// Disk cache keyed by request digest, one JSON file per entry. Reads verify
/// the digest against file content; writes go through a temp file and rename.
class ResponseCache {
public:
    explicit ResponseCache(std::string dir);

    std::optional<BackendResponse> lookup(const BackendRequest& request) const;
    void store(const BackendRequest& request, const BackendResponse& response);

    const std::string& dir() const { return dir_; }

private:
    std::string dir_;
    mutable std::mutex mutex_;
};

/// Wraps another backend with a ResponseCache: hits never reach the inner
/// backend.
class CachingBackend : public Backend {
public:
    CachingBackend(std::shared_ptr<Backend> inner, std::shared_ptr<ResponseCache> cache);

    BackendResponse complete(const BackendRequest& request) override;
    std::string name() const override;

private:
    std::shared_ptr<Backend> inner_;
    std::shared_ptr<ResponseCache> cache_;
};

}  // namespace ccotom::backend
