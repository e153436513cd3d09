#pragma once

#include <stdexcept>
#include <string>

namespace ccotom {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// --- constraints ---

class StepNotInChain : public Error {
public:
    StepNotInChain(const std::string& family, const std::string& task, const std::string& dimension)
        : Error("no chain step infers '" + dimension + "' for task '" + task +
                "' in family '" + family + "'") {}
};

class UnknownConstraintId : public Error {
public:
    explicit UnknownConstraintId(const std::string& id)
        : Error("unknown constraint id: " + id) {}
};

// --- prompting ---

class MissingPlaceholder : public Error {
public:
    explicit MissingPlaceholder(const std::string& name)
        : Error("missing binding for placeholder {" + name + "}"), name_(name) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class EmptyAgentResponse : public Error {
public:
    EmptyAgentResponse() : Error("agent identification returned an empty name") {}
};

class UnparseableChoice : public Error {
public:
    explicit UnparseableChoice(const std::string& response)
        : Error("no option could be extracted from response: " +
                (response.size() > 120 ? response.substr(0, 120) + "..." : response)) {}
};

class TemplateError : public Error {
public:
    explicit TemplateError(const std::string& what) : Error(what) {}
};

// --- backend ---

class ProviderError : public Error {
public:
    ProviderError(long status, const std::string& body)
        : Error("provider returned status " + std::to_string(status) + ": " +
                (body.size() > 200 ? body.substr(0, 200) + "..." : body)),
          status_(status),
          body_(body) {}
    long status() const { return status_; }
    const std::string& body() const { return body_; }

private:
    long status_;
    std::string body_;
};

class TimeoutError : public Error {
public:
    explicit TimeoutError(const std::string& what) : Error("request timed out: " + what) {}
};

class CacheCorrupt : public Error {
public:
    explicit CacheCorrupt(const std::string& what) : Error("cache entry corrupt: " + what) {}
};

class NoScriptedMatch : public Error {
public:
    explicit NoScriptedMatch(const std::string& prompt)
        : Error("no scripted response matches prompt: " +
                (prompt.size() > 160 ? prompt.substr(0, 160) + "..." : prompt)) {}
};

// --- chain ---

class InvalidAblation : public Error {
public:
    explicit InvalidAblation(const std::string& what) : Error(what) {}
};

// --- datasets ---

class SchemaError : public Error {
public:
    SchemaError(size_t line, const std::string& field, const std::string& what)
        : Error("line " + std::to_string(line) + ", field '" + field + "': " + what),
          line_(line),
          field_(field) {}
    size_t line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    size_t line_;
    std::string field_;
};

class DuplicateId : public Error {
public:
    DuplicateId(size_t line, const std::string& id)
        : Error("line " + std::to_string(line) + ": duplicate example id '" + id + "'") {}
};

class BrokenPair : public Error {
public:
    BrokenPair(size_t line, const std::string& pair_id, const std::string& condition)
        : Error("line " + std::to_string(line) + ": pair '" + pair_id +
                "' has two records with condition " + condition) {}
};

class UnknownExampleId : public Error {
public:
    explicit UnknownExampleId(const std::string& id)
        : Error("trace references unknown example id '" + id + "'") {}
};

// --- eval ---

class EmbedderError : public Error {
public:
    explicit EmbedderError(const std::string& what) : Error("embedder failed: " + what) {}
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(size_t a, size_t b)
        : Error("embedding vectors of unequal length: " + std::to_string(a) + " vs " +
                std::to_string(b)) {}
};

// --- cli / config ---

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace ccotom
