#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccotom/backend.hpp"
#include "ccotom/core.hpp"
#include "ccotom/prompting.hpp"

namespace ccotom::eval {

/// Normalization used by token_f1: lowercase, strip punctuation characters,
/// drop the articles a/an/the, split on whitespace.
std::vector<std::string> normalize_tokens(const std::string& text);

/// Bag-of-tokens F1 between prediction and reference after normalization.
/// Both empty after normalization scores 1.0, exactly one empty scores 0.0.
double token_f1(const std::string& prediction, const std::string& reference);

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<double> embed(const std::string& text) = 0;
    virtual std::string name() const = 0;
};

/// 1 - cosine similarity. Throws DimensionMismatch on unequal lengths and
/// EmbedderError on zero vectors.
double cosine_distance(const std::vector<double>& a, const std::vector<double>& b);

/// Embedder for tests and offline runs: every distinct string maps to its own
/// unit basis vector, so equal strings have distance 0 and different strings
/// distance 1.
class OrthogonalTestEmbedder : public Embedder {
public:
    explicit OrthogonalTestEmbedder(size_t dimension = 64);
    std::vector<double> embed(const std::string& text) override;
    std::string name() const override { return "test"; }

private:
    size_t dimension_;
    std::map<std::string, size_t> assigned_;
    std::mutex mutex_;
};

struct EmbedderHttpConfig {
    std::string url;
    std::string model;
    std::string api_key;
    int timeout_ms = 30000;
    int max_retries = 3;
    int retry_base_ms = 250;
    int retry_max_ms = 4000;
    std::string cache_dir;
};

/// Embeddings endpoint client with the same retry discipline as the chat
/// backend and an optional disk cache.
class HttpEmbedder : public Embedder {
public:
    explicit HttpEmbedder(EmbedderHttpConfig config);

    std::vector<double> embed(const std::string& text) override;
    std::string name() const override { return "http"; }

private:
    std::vector<double> fetch(const std::string& text);

    EmbedderHttpConfig config_;
    std::unique_ptr<backend::ResponseCache> cache_;
};

/// Builds an embedder from config json ({"type":"test"} or {"type":"http",...}).
std::unique_ptr<Embedder> make_embedder(const nlohmann::json& config);
std::unique_ptr<Embedder> load_embedder(const std::string& config_path);

struct DistVerdict {
    bool correct = false;
    double gold_distance = 0.0;
    std::optional<double> min_wrong_distance;
};

/// Distance scoring for free-form answers: the prediction is correct when it
/// sits strictly closer to the reference than to every wrong answer, or
/// within tau of the reference when no wrong answers exist. Identical strings
/// count as distance zero without consulting the embedder.
DistVerdict score_dist(const std::string& prediction, const std::string& reference,
                       const std::vector<std::string>& wrong_answers, Embedder& embedder,
                       double tau = 0.4);

struct Verdict {
    std::string example_id;
    bool correct = false;
    bool unparseable = false;
    bool errored = false;
    int chosen_index = -1;  // multiple choice only
    std::string answer_text;
    std::optional<double> f1;
    std::optional<double> gold_distance;
    std::optional<double> min_wrong_distance;

    bool operator==(const Verdict&) const = default;
};

/// Scores one example. Missing answers (unparseable or errored chains) are
/// incorrect but keep their flags so reports can count them separately.
Verdict score_answer(const ToMExample& example,
                     const std::optional<prompting::ParsedAnswer>& answer, bool unparseable,
                     bool errored, Embedder& embedder, double tau = 0.4);

nlohmann::json verdict_to_json(const Verdict& v);
Verdict verdict_from_json(const nlohmann::json& j);

struct GroupStats {
    std::string label;
    size_t n = 0;
    double accuracy = 0.0;
    std::optional<double> mean_f1;

    bool operator==(const GroupStats&) const = default;
};

struct EvalReport {
    DatasetFamily family = DatasetFamily::BigToM;
    std::string method;
    size_t n_total = 0;
    size_t n_unparseable = 0;
    size_t n_errored = 0;
    double overall_accuracy = 0.0;
    std::vector<GroupStats> groups;
};

/// Aggregates verdicts. Narrative datasets report per task the accuracy on
/// true-belief items, false-belief items, and the per-pair conjunction of the
/// two; conversation datasets report per scope the choice accuracy, dist
/// accuracy and mean token F1. Verdicts must parallel examples one to one.
EvalReport aggregate(const std::vector<ToMExample>& examples, const std::vector<Verdict>& verdicts,
                     const std::string& method);

nlohmann::json report_to_json(const EvalReport& report);

/// Fixed-width text table of the report groups.
std::string render_report_table(const EvalReport& report);

}  // namespace ccotom::eval
