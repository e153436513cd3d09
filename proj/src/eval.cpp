#include "ccotom/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "ccotom/datasets.hpp"
#include "ccotom/errors.hpp"
#include "ccotom/http_backend.hpp"

using nlohmann::json;

namespace ccotom::eval {

std::vector<std::string> normalize_tokens(const std::string& text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (unsigned char c : text) {
        if (std::ispunct(c)) continue;
        cleaned += static_cast<char>(std::tolower(c));
    }
    std::vector<std::string> tokens;
    std::istringstream in(cleaned);
    std::string token;
    while (in >> token) {
        if (token == "a" || token == "an" || token == "the") continue;
        tokens.push_back(token);
    }
    return tokens;
}

double token_f1(const std::string& prediction, const std::string& reference) {
    const auto pred = normalize_tokens(prediction);
    const auto ref = normalize_tokens(reference);
    if (pred.empty() && ref.empty()) return 1.0;
    if (pred.empty() || ref.empty()) return 0.0;

    std::map<std::string, int> ref_counts;
    for (const auto& t : ref) ++ref_counts[t];
    int common = 0;
    for (const auto& t : pred) {
        auto it = ref_counts.find(t);
        if (it != ref_counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double precision = static_cast<double>(common) / pred.size();
    const double recall = static_cast<double>(common) / ref.size();
    return 2.0 * precision * recall / (precision + recall);
}

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw EmbedderError("cannot take cosine distance of a zero vector");
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

OrthogonalTestEmbedder::OrthogonalTestEmbedder(size_t dimension) : dimension_(dimension) {}

std::vector<double> OrthogonalTestEmbedder::embed(const std::string& text) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto [it, inserted] = assigned_.emplace(text, assigned_.size());
    if (it->second >= dimension_)
        throw EmbedderError("test embedder saw more distinct strings than its dimension");
    std::vector<double> v(dimension_, 0.0);
    v[it->second] = 1.0;
    return v;
}

HttpEmbedder::HttpEmbedder(EmbedderHttpConfig config) : config_(std::move(config)) {
    if (!config_.cache_dir.empty())
        cache_ = std::make_unique<backend::ResponseCache>(config_.cache_dir);
}

namespace {

backend::BackendRequest embedding_cache_key(const std::string& model, const std::string& text) {
    backend::BackendRequest key;
    key.model = model;
    key.prompt = text;
    key.temperature = 0.0;
    key.max_tokens = 0;
    return key;
}

std::vector<double> parse_embedding_body(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception&) {
        throw EmbedderError("embeddings endpoint returned invalid json");
    }
    if (!j.contains("data") || !j["data"].is_array() || j["data"].empty() ||
        !j["data"][0].contains("embedding"))
        throw EmbedderError("embeddings endpoint response lacks data[0].embedding");
    return j["data"][0]["embedding"].get<std::vector<double>>();
}

}  // namespace

std::vector<double> HttpEmbedder::fetch(const std::string& text) {
    const auto url = backend::parse_url(config_.url);
    json body;
    body["model"] = config_.model;
    body["input"] = text;
    const std::string payload = body.dump();

    int last_status = 0;
    std::string last_body;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        httplib::Client client(url.base);
        client.set_connection_timeout(std::chrono::milliseconds(config_.timeout_ms));
        client.set_read_timeout(std::chrono::milliseconds(config_.timeout_ms));
        if (!config_.api_key.empty()) client.set_bearer_token_auth(config_.api_key);
        auto res = client.Post(url.path, payload, "application/json");
        if (res && res->status == 200) return parse_embedding_body(res->body);
        bool retryable;
        if (!res) {
            last_status = 0;
            last_body = httplib::to_string(res.error());
            retryable = true;
        } else {
            last_status = res->status;
            last_body = res->body;
            retryable = res->status == 408 || res->status == 429 ||
                        (res->status >= 500 && res->status < 600);
        }
        if (!retryable || attempt == config_.max_retries) break;
        long delay = config_.retry_base_ms;
        for (int i = 0; i < attempt; ++i) delay = std::min<long>(delay * 2, config_.retry_max_ms);
        std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
    throw EmbedderError("embeddings request failed with status " + std::to_string(last_status) +
                        ": " + last_body);
}

std::vector<double> HttpEmbedder::embed(const std::string& text) {
    const auto key = embedding_cache_key(config_.model, text);
    if (cache_) {
        if (auto hit = cache_->lookup(key))
            return json::parse(hit->text).get<std::vector<double>>();
    }
    std::vector<double> v = fetch(text);
    if (cache_) {
        backend::BackendResponse stored;
        stored.text = json(v).dump();
        cache_->store(key, stored);
    }
    return v;
}

std::unique_ptr<Embedder> make_embedder(const json& config) {
    const std::string type = config.value("type", std::string("test"));
    if (type == "test")
        return std::make_unique<OrthogonalTestEmbedder>(config.value("dimension", 64));
    if (type == "http") {
        EmbedderHttpConfig c;
        c.url = config.value("url", std::string());
        if (c.url.empty()) throw ConfigError("http embedder config lacks url");
        c.model = config.value("model", std::string("embedding"));
        const std::string key_env = config.value("api_key_env", std::string());
        if (!key_env.empty()) {
            if (const char* key = std::getenv(key_env.c_str())) c.api_key = key;
        }
        c.timeout_ms = config.value("timeout_ms", c.timeout_ms);
        c.max_retries = config.value("max_retries", c.max_retries);
        c.retry_base_ms = config.value("retry_base_ms", c.retry_base_ms);
        c.retry_max_ms = config.value("retry_max_ms", c.retry_max_ms);
        c.cache_dir = config.value("cache_dir", std::string());
        return std::make_unique<HttpEmbedder>(std::move(c));
    }
    throw ConfigError("embedder config needs type \"test\" or \"http\"");
}

std::unique_ptr<Embedder> load_embedder(const std::string& config_path) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw ConfigError("cannot read embedder config: " + config_path);
    json config;
    try {
        in >> config;
    } catch (const json::exception& e) {
        throw ConfigError("embedder config is not valid json: " + std::string(e.what()));
    }
    return make_embedder(config);
}

DistVerdict score_dist(const std::string& prediction, const std::string& reference,
                       const std::vector<std::string>& wrong_answers, Embedder& embedder,
                       double tau) {
    DistVerdict out;
    std::optional<std::vector<double>> pred_vec;
    auto distance_to = [&](const std::string& target) {
        if (prediction == target) return 0.0;
        if (!pred_vec) pred_vec = embedder.embed(prediction);
        return cosine_distance(*pred_vec, embedder.embed(target));
    };
    out.gold_distance = distance_to(reference);
    for (const auto& wrong : wrong_answers) {
        const double d = distance_to(wrong);
        if (!out.min_wrong_distance || d < *out.min_wrong_distance) out.min_wrong_distance = d;
    }
    if (out.min_wrong_distance)
        out.correct = out.gold_distance == 0.0 || out.gold_distance < *out.min_wrong_distance;
    else
        out.correct = out.gold_distance <= tau;
    return out;
}

Verdict score_answer(const ToMExample& example,
                     const std::optional<prompting::ParsedAnswer>& answer, bool unparseable,
                     bool errored, Embedder& embedder, double tau) {
    Verdict v;
    v.example_id = example.id;
    v.unparseable = unparseable;
    v.errored = errored;
    if (!answer) {
        if (example.question.format == QuestionFormat::FreeForm) v.f1 = 0.0;
        return v;
    }
    if (example.question.format == QuestionFormat::MultipleChoice) {
        v.chosen_index = answer->option_index;
        v.answer_text = answer->text;
        v.correct = answer->option_index == example.gold.option_index;
        return v;
    }
    v.answer_text = answer->text;
    v.f1 = token_f1(answer->text, example.gold.reference_text);
    const DistVerdict d =
        score_dist(answer->text, example.gold.reference_text, example.gold.wrong_answers,
                   embedder, tau);
    v.correct = d.correct;
    v.gold_distance = d.gold_distance;
    v.min_wrong_distance = d.min_wrong_distance;
    return v;
}

json verdict_to_json(const Verdict& v) {
    json j;
    j["example_id"] = v.example_id;
    j["correct"] = v.correct;
    j["unparseable"] = v.unparseable;
    j["errored"] = v.errored;
    if (v.chosen_index >= 0) j["chosen_index"] = v.chosen_index;
    if (!v.answer_text.empty()) j["answer_text"] = v.answer_text;
    if (v.f1) j["f1"] = *v.f1;
    if (v.gold_distance) j["gold_distance"] = *v.gold_distance;
    if (v.min_wrong_distance) j["min_wrong_distance"] = *v.min_wrong_distance;
    return j;
}

Verdict verdict_from_json(const json& j) {
    Verdict v;
    v.example_id = j.at("example_id").get<std::string>();
    v.correct = j.value("correct", false);
    v.unparseable = j.value("unparseable", false);
    v.errored = j.value("errored", false);
    v.chosen_index = j.value("chosen_index", -1);
    v.answer_text = j.value("answer_text", std::string());
    if (j.contains("f1")) v.f1 = j["f1"].get<double>();
    if (j.contains("gold_distance")) v.gold_distance = j["gold_distance"].get<double>();
    if (j.contains("min_wrong_distance"))
        v.min_wrong_distance = j["min_wrong_distance"].get<double>();
    return v;
}

namespace {

struct Tally {
    size_t n = 0;
    size_t correct = 0;
    double f1_sum = 0.0;
    size_t f1_n = 0;

    void add(bool is_correct) {
        ++n;
        if (is_correct) ++correct;
    }
    double accuracy() const { return n ? static_cast<double>(correct) / n : 0.0; }
};

void push_group(std::vector<GroupStats>& groups, const std::string& label, const Tally& tally,
                bool with_f1) {
    if (tally.n == 0) return;
    GroupStats g;
    g.label = label;
    g.n = tally.n;
    g.accuracy = tally.accuracy();
    if (with_f1) g.mean_f1 = tally.f1_n ? tally.f1_sum / tally.f1_n : 0.0;
    groups.push_back(std::move(g));
}

}  // namespace

EvalReport aggregate(const std::vector<ToMExample>& examples, const std::vector<Verdict>& verdicts,
                     const std::string& method) {
    if (examples.size() != verdicts.size())
        throw Error("verdict count does not match example count");
    for (size_t i = 0; i < examples.size(); ++i) {
        if (examples[i].id != verdicts[i].example_id)
            throw Error("verdict order does not match examples at index " + std::to_string(i));
    }

    EvalReport report;
    report.method = method;
    report.n_total = examples.size();
    if (!examples.empty()) report.family = examples.front().family;

    size_t correct_total = 0;
    for (const auto& v : verdicts) {
        if (v.correct) ++correct_total;
        if (v.unparseable) ++report.n_unparseable;
        if (v.errored) ++report.n_errored;
    }
    report.overall_accuracy =
        report.n_total ? static_cast<double>(correct_total) / report.n_total : 0.0;

    if (report.family == DatasetFamily::BigToM) {
        const auto pairing = datasets::pair_conditions(examples);
        const TaskType tasks[] = {TaskType::ForwardBelief, TaskType::ForwardAction,
                                  TaskType::BackwardBelief};
        Tally all_tb, all_fb, all_pair;
        for (TaskType task : tasks) {
            Tally tb, fb, pair;
            for (size_t i = 0; i < examples.size(); ++i) {
                if (examples[i].task != task || !examples[i].condition) continue;
                if (*examples[i].condition == Condition::TrueBelief) {
                    tb.add(verdicts[i].correct);
                    all_tb.add(verdicts[i].correct);
                } else {
                    fb.add(verdicts[i].correct);
                    all_fb.add(verdicts[i].correct);
                }
            }
            for (const auto& p : pairing.pairs) {
                if (examples[p.true_belief].task != task) continue;
                const bool both = verdicts[p.true_belief].correct && verdicts[p.false_belief].correct;
                pair.add(both);
                all_pair.add(both);
            }
            const std::string label = to_string(task);
            push_group(report.groups, label + ".tb", tb, false);
            push_group(report.groups, label + ".fb", fb, false);
            push_group(report.groups, label + ".tb_and_fb", pair, false);
        }
        push_group(report.groups, "overall.tb", all_tb, false);
        push_group(report.groups, "overall.fb", all_fb, false);
        push_group(report.groups, "overall.tb_and_fb", all_pair, false);
    } else {
        const ConversationScope scopes[] = {ConversationScope::Short, ConversationScope::Full};
        Tally all_choice, all_dist;
        auto collect = [&](auto accept, Tally& choice, Tally& dist) {
            for (size_t i = 0; i < examples.size(); ++i) {
                if (!accept(examples[i])) continue;
                if (examples[i].question.format == QuestionFormat::MultipleChoice) {
                    choice.add(verdicts[i].correct);
                } else {
                    dist.add(verdicts[i].correct);
                    if (verdicts[i].f1) {
                        dist.f1_sum += *verdicts[i].f1;
                        ++dist.f1_n;
                    }
                }
            }
        };
        for (ConversationScope scope : scopes) {
            Tally choice, dist;
            collect([&](const ToMExample& e) { return e.scope == scope; }, choice, dist);
            const std::string label = to_string(scope);
            push_group(report.groups, label + ".choice", choice, false);
            push_group(report.groups, label + ".dist", dist, true);
        }
        collect([](const ToMExample&) { return true; }, all_choice, all_dist);
        push_group(report.groups, "overall.choice", all_choice, false);
        push_group(report.groups, "overall.dist", all_dist, true);
    }
    return report;
}

json report_to_json(const EvalReport& report) {
    json j;
    j["family"] = to_string(report.family);
    j["method"] = report.method;
    j["n_total"] = report.n_total;
    j["n_unparseable"] = report.n_unparseable;
    j["n_errored"] = report.n_errored;
    j["overall_accuracy"] = report.overall_accuracy;
    json groups = json::array();
    for (const auto& g : report.groups) {
        json gj;
        gj["label"] = g.label;
        gj["n"] = g.n;
        gj["accuracy"] = g.accuracy;
        if (g.mean_f1) gj["mean_f1"] = *g.mean_f1;
        groups.push_back(gj);
    }
    j["groups"] = groups;
    return j;
}

namespace {

std::string fmt3(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(3) << v;
    return out.str();
}

const GroupStats* find_group(const EvalReport& report, const std::string& label) {
    for (const auto& g : report.groups) {
        if (g.label == label) return &g;
    }
    return nullptr;
}

std::string cell(const EvalReport& report, const std::string& label, bool f1) {
    const GroupStats* g = find_group(report, label);
    if (!g) return "-";
    if (f1) return g->mean_f1 ? fmt3(*g->mean_f1) : "-";
    return fmt3(g->accuracy);
}

void append_row(std::ostringstream& out, const std::vector<std::string>& cells,
                const std::vector<size_t>& widths) {
    for (size_t i = 0; i < cells.size(); ++i) {
        out << cells[i];
        if (i + 1 < cells.size())
            out << std::string(widths[i] > cells[i].size() ? widths[i] - cells[i].size() + 2 : 2, ' ');
    }
    out << '\n';
}

}  // namespace

std::string render_report_table(const EvalReport& report) {
    std::ostringstream out;
    out << "method=" << report.method << " family=" << to_string(report.family)
        << " n=" << report.n_total << " unparseable=" << report.n_unparseable
        << " errored=" << report.n_errored << "\n\n";

    std::vector<std::vector<std::string>> rows;
    if (report.family == DatasetFamily::BigToM) {
        rows.push_back({"task", "tb", "fb", "tb_and_fb"});
        for (const std::string label :
             {"forward_belief", "forward_action", "backward_belief", "overall"}) {
            if (!find_group(report, label + ".tb") && !find_group(report, label + ".fb")) continue;
            rows.push_back({label, cell(report, label + ".tb", false),
                            cell(report, label + ".fb", false),
                            cell(report, label + ".tb_and_fb", false)});
        }
    } else {
        rows.push_back({"scope", "choice", "dist", "token_f1"});
        for (const std::string label : {"short", "full", "overall"}) {
            if (!find_group(report, label + ".choice") && !find_group(report, label + ".dist"))
                continue;
            rows.push_back({label, cell(report, label + ".choice", false),
                            cell(report, label + ".dist", false),
                            cell(report, label + ".dist", true)});
        }
    }

    std::vector<size_t> widths(rows.front().size(), 0);
    for (const auto& row : rows)
        for (size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
    for (const auto& row : rows) append_row(out, row, widths);
    return out.str();
}

}  // namespace ccotom::eval
