// Acceptance gate: one self-contained check per line, each validating a core
// guarantee of the library end to end. Exit code is the number of failed
// gating checks; the live smoke check at the end never gates.

#include <ccotom/chain.hpp>
#include <ccotom/cli.hpp>
#include <ccotom/datasets.hpp>
#include <ccotom/errors.hpp>
#include <ccotom/eval.hpp>
#include <ccotom/http_backend.hpp>

#include <json.hpp>

#include "test_util.hpp"

#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace ccotom;
using testutil::TempDir;
using testutil::fixture;
using testutil::read_file;
using testutil::write_file;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool condition, const std::string& what) {
    if (!condition) throw Failure(what);
}

chain::ChainExecutor make_executor(const std::string& model,
                                   chain::AblationConfig ablation = {}) {
    chain::ChainSettings settings;
    settings.model = model;
    settings.ablation = std::move(ablation);
    return chain::ChainExecutor(prompting::TemplateLibrary::builtin(),
                                constraints::ConstraintRegistry::builtin(), settings);
}

backend::ScriptedBackend& scripted(backend::Backend& b) {
    return dynamic_cast<backend::ScriptedBackend&>(b);
}

// ---------------------------------------------------------------------------
// 1. Chain shapes: step counts and conditioning sets per family and task.

void check_chain_shapes() {
    using chain::StepKind;
    using D = ToMDimension;

    auto fb = chain::plan(DatasetFamily::BigToM, TaskType::ForwardBelief);
    require(fb.size() == 3, "forward-belief plan must have 3 steps");
    require(fb[1].infer == D::Percept && fb[1].conditioned_on.empty(),
            "forward-belief percept step must be unconditioned");
    require(fb[2].conditioned_on == std::vector<D>{D::Percept},
            "forward-belief answer must condition on the percept");

    auto fa = chain::plan(DatasetFamily::BigToM, TaskType::ForwardAction);
    require(fa.size() == 5, "forward-action plan must have 5 steps");
    require(fa[2].infer == D::Belief &&
                fa[2].conditioned_on == std::vector<D>{D::Percept},
            "forward-action belief step must condition on the percept");
    require(fa[4].conditioned_on == std::vector<D>{D::Belief, D::Desire},
            "forward-action answer must condition on belief and desire");

    auto bb = chain::plan(DatasetFamily::BigToM, TaskType::BackwardBelief);
    require(bb.size() == 4, "backward-belief plan must have 4 steps");
    require(bb[2].infer == D::Action &&
                bb[2].conditioned_on == std::vector<D>{D::Desire},
            "backward-belief action step must condition on the desire");
    require(bb[3].conditioned_on == std::vector<D>{D::Action, D::Desire},
            "backward-belief answer must condition on action and desire");

    auto fan = chain::plan(DatasetFamily::Fantom, TaskType::ForwardBelief);
    require(fan.size() == 4, "conversation plan must have 4 entries");
    require(fan[1].kind == StepKind::FactQuestionReconstruction,
            "conversation plan must reconstruct the fact question second");
    require(fan[3].conditioned_on == std::vector<D>{D::Percept},
            "conversation answer must condition on the percept");

    // Executed traces must realize the planned sequences.
    auto examples = datasets::load(fixture("bigtom_synthetic.jsonl"), DatasetFamily::BigToM);
    auto handle = backend::load_backend(fixture("bigtom_script.json"));
    auto executor = make_executor(handle.model);
    const std::map<std::string, size_t> expected_steps = {
        {"bt_p1_tb", 3}, {"bt_p3_tb", 5}, {"bt_p5_tb", 4}};
    for (const auto& [id, n] : expected_steps) {
        auto trace = executor.execute(datasets::find_example(examples, id),
                                      chain::Method::CCoToM, *handle.backend);
        require(!trace.error.has_value(), id + " must execute cleanly");
        require(trace.steps.size() == n,
                id + " trace must have " + std::to_string(n) + " backend calls");
    }

    auto fantom_examples =
        datasets::load(fixture("fantom_synthetic.jsonl"), DatasetFamily::Fantom);
    auto fantom_handle = backend::load_backend(fixture("fantom_script.json"));
    auto fantom_executor = make_executor(fantom_handle.model);
    auto trace = fantom_executor.execute(datasets::find_example(fantom_examples, "fn_f1"),
                                         chain::Method::CCoToM, *fantom_handle.backend);
    require(!trace.error.has_value(), "conversation chain must execute cleanly");
    require(trace.steps.size() == 5,
            "conversation trace must spend two calls on the fact question (5 total)");
}

// ---------------------------------------------------------------------------
// 2. Constraint fidelity: rendered prompts carry the selected constraint
//    sentences byte for byte with the agent substituted.

void check_constraint_fidelity() {
    auto registry = constraints::ConstraintRegistry::builtin();

    auto bb_final = registry.select(DatasetFamily::BigToM, TaskType::BackwardBelief,
                                    ToMDimension::Belief);
    require(bb_final.size() == 2 && bb_final[0].id == "bigtom.def.belief" &&
                bb_final[1].id == "bigtom.dep.action",
            "belief recovery must pair the belief definition with the action dependency");

    struct Case {
        std::string dataset;
        std::string script;
        DatasetFamily family;
        std::string example_id;
        std::string agent;
    };
    const std::vector<Case> cases = {
        {"bigtom_synthetic.jsonl", "bigtom_script.json", DatasetFamily::BigToM, "bt_p1_tb",
         "Alice"},
        {"bigtom_synthetic.jsonl", "bigtom_script.json", DatasetFamily::BigToM, "bt_p3_tb",
         "Eli"},
        {"bigtom_synthetic.jsonl", "bigtom_script.json", DatasetFamily::BigToM, "bt_p5_tb",
         "Ivan"},
        {"fantom_synthetic.jsonl", "fantom_script.json", DatasetFamily::Fantom, "fn_f1", "Mia"},
    };

    for (const auto& c : cases) {
        auto examples = datasets::load(fixture(c.dataset), c.family);
        auto handle = backend::load_backend(fixture(c.script));
        auto executor = make_executor(handle.model);
        const auto& example = datasets::find_example(examples, c.example_id);
        auto plan = chain::plan(c.family, example.task);
        auto trace = executor.execute(example, chain::Method::CCoToM, *handle.backend);
        require(!trace.error.has_value(), c.example_id + " must execute cleanly");
        require(trace.agent == c.agent, c.example_id + " must identify agent " + c.agent);

        size_t step_index = 0;
        for (const auto& planned : plan) {
            if (planned.kind == chain::StepKind::AgentIdentification) {
                step_index += 1;
                continue;
            }
            if (planned.kind == chain::StepKind::FactQuestionReconstruction) {
                step_index += 2;  // two calls, no constraint block
                continue;
            }
            const auto& prompt = trace.steps.at(step_index).prompt;
            for (const auto& id : planned.constraint_ids) {
                std::string sentence = registry.get(id).template_text;
                size_t pos;
                while ((pos = sentence.find("{agent}")) != std::string::npos)
                    sentence.replace(pos, 7, c.agent);
                require(prompt.find(sentence) != std::string::npos,
                        c.example_id + " step " + std::to_string(step_index) +
                            " prompt must contain constraint " + id + " verbatim");
            }
            step_index += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// 3. Case-study replay: the recorded four-step reasoning reproduces option (a).

void check_case_study() {
    auto examples = datasets::load(fixture("casestudy.jsonl"), DatasetFamily::BigToM);
    auto handle = backend::load_backend(fixture("casestudy_script.json"));
    auto executor = make_executor(handle.model);

    auto trace = executor.execute(examples.at(0), chain::Method::CCoToM, *handle.backend);
    require(!trace.error.has_value(), "case-study chain must execute cleanly");
    require(trace.agent == "Luka", "case study must identify Luka");
    require(trace.steps.size() == 5, "case study must run the 5-call action chain");
    require(trace.steps[1].parsed ==
                "Luka does not perceive the change in the environment caused by the wind.",
            "percept inference must match the recorded response");
    require(trace.steps[2].parsed == "Luka still believes it might rain soon.",
            "belief inference must match the recorded response");
    require(trace.steps[3].parsed == "Luka wants to water the plants in the park.",
            "desire inference must match the recorded response");
    require(trace.final_answer.has_value(), "case study must produce a final answer");
    require(trace.final_answer->option_index == 0,
            "case study must answer option (a): wait for the rain");
}

// ---------------------------------------------------------------------------
// 4. Ablation semantics: dropping a dimension removes only its step; dropping
//    constraints empties the constraint blocks only.

void check_ablation_semantics() {
    chain::AblationConfig drop_percept;
    drop_percept.dropped = {ToMDimension::Percept};
    auto ablated = chain::plan(DatasetFamily::BigToM, TaskType::ForwardBelief, drop_percept);
    require(ablated.size() == 2, "dropping the percept must shorten forward-belief to 2 steps");
    require(ablated[1].constraint_ids ==
                std::vector<std::string>{"bigtom.def.belief", "bigtom.dep.belief"},
            "dropping a dimension must keep the constraint sets");

    chain::AblationConfig no_constraints;
    no_constraints.drop_constraints = true;
    auto constraint_free =
        chain::plan(DatasetFamily::BigToM, TaskType::ForwardAction, no_constraints);
    require(constraint_free.size() == 5,
            "dropping constraints must not change the step count");
    for (const auto& step : constraint_free)
        require(step.constraint_ids.empty(), "every constraint set must be emptied");

    // Executed form of both ablations.
    auto examples = datasets::load(fixture("bigtom_synthetic.jsonl"), DatasetFamily::BigToM);
    auto handle = backend::load_backend(fixture("bigtom_script.json"));
    const auto& ex = datasets::find_example(examples, "bt_p1_tb");

    auto dropped_trace =
        make_executor(handle.model, drop_percept).execute(ex, chain::Method::CCoToM,
                                                          *handle.backend);
    require(!dropped_trace.error.has_value(), "percept-free chain must execute cleanly");
    require(dropped_trace.steps.size() == 2, "percept-free chain must make 2 calls");
    require(dropped_trace.steps[1].prompt.find(
                "Belief of Alice is determined by the percept of Alice.") != std::string::npos,
            "percept-free final prompt must keep its constraint block");
    require(dropped_trace.steps[1].prompt.find("Percept of Alice:") == std::string::npos,
            "percept-free final prompt must not quote a percept inference");

    auto bare_trace =
        make_executor(handle.model, no_constraints).execute(ex, chain::Method::CCoToM,
                                                            *handle.backend);
    require(!bare_trace.error.has_value(), "constraint-free chain must execute cleanly");
    require(bare_trace.steps.size() == 3, "constraint-free chain must keep all 3 calls");
    for (const auto& step : bare_trace.steps)
        require(step.prompt.find("is determined by") == std::string::npos &&
                    step.prompt.find("perceives the causal event") == std::string::npos,
                "constraint-free prompts must contain no constraint sentence");
}

// ---------------------------------------------------------------------------
// 5. One-step variant: verbatim collapsed instruction, 2 calls vs 3.

void check_one_step() {
    auto examples = datasets::load(fixture("bigtom_synthetic.jsonl"), DatasetFamily::BigToM);
    auto handle = backend::load_backend(fixture("bigtom_script.json"));
    auto executor = make_executor(handle.model);
    const auto& ex = datasets::find_example(examples, "bt_p1_tb");

    auto prompt = executor.one_step_prompt(ex, "Alice");
    require(prompt.find("First, infer the percept of Alice. Next, answer the question based on "
                        "the inferred percept of Alice.") != std::string::npos,
            "one-step prompt must contain the collapsed instruction verbatim");

    auto& backend_ref = scripted(*handle.backend);
    size_t before = backend_ref.call_count();
    auto one_step = executor.execute(ex, chain::Method::OneStep, *handle.backend);
    size_t one_step_calls = backend_ref.call_count() - before;
    require(!one_step.error.has_value(), "one-step run must execute cleanly");
    require(one_step_calls == 2, "one-step must issue exactly 2 backend calls");

    before = backend_ref.call_count();
    auto multi = executor.execute(ex, chain::Method::CCoToM, *handle.backend);
    size_t multi_calls = backend_ref.call_count() - before;
    require(!multi.error.has_value(), "multi-step run must execute cleanly");
    require(multi_calls == 3, "the multi-step chain must issue exactly 3 backend calls");
}

// ---------------------------------------------------------------------------
// 6. Token F1 equals an independent bag-overlap oracle on randomized pairs.

double oracle_f1(const std::string& prediction, const std::string& reference) {
    auto bag = [](const std::string& text) {
        std::map<std::string, int> counts;
        std::string word;
        auto flush = [&] {
            if (word == "a" || word == "an" || word == "the") word.clear();
            if (!word.empty()) ++counts[word];
            word.clear();
        };
        for (unsigned char c : text) {
            if (std::isspace(c)) {
                flush();
            } else if (!std::ispunct(c)) {
                word += static_cast<char>(std::tolower(c));
            }
        }
        flush();
        return counts;
    };
    auto p = bag(prediction);
    auto r = bag(reference);
    int p_total = 0, r_total = 0, overlap = 0;
    for (auto& [w, n] : p) p_total += n;
    for (auto& [w, n] : r) r_total += n;
    for (auto& [w, n] : p) {
        auto it = r.find(w);
        if (it != r.end()) overlap += std::min(n, it->second);
    }
    if (p_total == 0 && r_total == 0) return 1.0;
    if (p_total == 0 || r_total == 0) return 0.0;
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / p_total;
    const double recall = static_cast<double>(overlap) / r_total;
    return 2.0 * precision * recall / (precision + recall);
}

void check_token_f1_oracle() {
    std::vector<std::pair<std::string, std::string>> pairs = {
        {"", ""},
        {"a the an", ""},
        {"", "the the the"},
        {"An apple.", "apple"},
        {"something", ""},
    };
    const std::vector<std::string> vocabulary = {
        "the",  "a",    "an",    "Pete", "Mia",   "sees",  "moved", "box,",
        "key!", "shelf", "on",   "under", "believes", "it's", "blue.", "red",
    };
    std::mt19937 rng(991);
    std::uniform_int_distribution<size_t> pick(0, vocabulary.size() - 1);
    std::uniform_int_distribution<int> length(0, 10);
    auto sentence = [&] {
        std::ostringstream out;
        int n = length(rng);
        for (int i = 0; i < n; ++i) {
            if (i) out << ' ';
            out << vocabulary[pick(rng)];
        }
        return out.str();
    };
    for (int i = 0; i < 150; ++i) pairs.emplace_back(sentence(), sentence());

    double max_deviation = 0.0;
    for (const auto& [pred, ref] : pairs) {
        max_deviation =
            std::max(max_deviation, std::fabs(eval::token_f1(pred, ref) - oracle_f1(pred, ref)));
    }
    require(max_deviation == 0.0, "token F1 must match the oracle exactly on " +
                                      std::to_string(pairs.size()) + " pairs");
}

// ---------------------------------------------------------------------------
// 7. Aggregation oracle: hand-computed paired accuracies, and the conjunction
//    bound on randomized verdicts.

void check_aggregation_oracle() {
    auto examples = datasets::load(fixture("bigtom_synthetic.jsonl"), DatasetFamily::BigToM);
    auto handle = backend::load_backend(fixture("bigtom_script.json"));
    auto executor = make_executor(handle.model);
    auto traces = executor.run_batch(examples, chain::Method::CCoToM, *handle.backend, 2);

    eval::OrthogonalTestEmbedder embedder;
    std::vector<eval::Verdict> verdicts;
    for (size_t i = 0; i < examples.size(); ++i) {
        verdicts.push_back(eval::score_answer(examples[i], traces[i].final_answer,
                                              traces[i].unparseable,
                                              traces[i].error.has_value(), embedder));
    }
    auto report = eval::aggregate(examples, verdicts, "ccotom");

    auto accuracy = [&](const std::string& label) {
        for (const auto& g : report.groups) {
            if (g.label == label) return g.accuracy;
        }
        throw Failure("report lacks group " + label);
    };
    require(accuracy("forward_belief.tb") == 1.0, "forward_belief.tb must be 2/2");
    require(accuracy("forward_belief.fb") == 0.5, "forward_belief.fb must be 1/2");
    require(accuracy("forward_belief.tb_and_fb") == 0.5, "forward_belief pairs must score 1/2");
    require(accuracy("forward_action.tb") == 0.5, "forward_action.tb must be 1/2");
    require(accuracy("forward_action.fb") == 1.0, "forward_action.fb must be 2/2");
    require(accuracy("forward_action.tb_and_fb") == 0.5, "forward_action pairs must score 1/2");
    require(accuracy("backward_belief.tb") == 0.5, "backward_belief.tb must be 1/2");
    require(accuracy("backward_belief.fb") == 0.0, "backward_belief.fb must be 0/2");
    require(accuracy("backward_belief.tb_and_fb") == 0.0, "backward_belief pairs must score 0/2");
    require(accuracy("overall.tb") == 4.0 / 6.0, "overall.tb must be 4/6");
    require(accuracy("overall.fb") == 3.0 / 6.0, "overall.fb must be 3/6");
    require(accuracy("overall.tb_and_fb") == 2.0 / 6.0, "overall pairs must score 2/6");
    require(report.overall_accuracy == 7.0 / 12.0, "overall accuracy must be 7/12");

    std::mt19937 rng(777);
    std::bernoulli_distribution coin(0.5);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<eval::Verdict> random_verdicts;
        for (const auto& ex : examples) {
            eval::Verdict v;
            v.example_id = ex.id;
            v.correct = coin(rng);
            random_verdicts.push_back(v);
        }
        auto r = eval::aggregate(examples, random_verdicts, "x");
        auto acc = [&](const std::string& label) {
            for (const auto& g : r.groups) {
                if (g.label == label) return g.accuracy;
            }
            throw Failure("randomized report lacks group " + label);
        };
        for (const std::string task :
             {"forward_belief", "forward_action", "backward_belief", "overall"}) {
            double tb = acc(task + ".tb");
            double fb = acc(task + ".fb");
            double both = acc(task + ".tb_and_fb");
            require(both <= std::min(tb, fb) + 1e-12,
                    "paired accuracy must never exceed either condition accuracy");
        }
    }
}

// ---------------------------------------------------------------------------
// 8. Determinism and cache: byte-identical reruns; warm cache answers without
//    any provider call.

void check_determinism_and_cache() {
    TempDir tmp("acceptance_determinism");

    auto run_into = [&](const std::string& name, const std::string& backend_path) {
        cli::RunConfig rc;
        rc.dataset_path = fixture("bigtom_synthetic.jsonl");
        rc.family = DatasetFamily::BigToM;
        rc.method = chain::Method::CCoToM;
        rc.backend_path = backend_path;
        rc.workers = 3;
        rc.out_dir = (tmp.path / name).string();
        rc.quiet = true;
        return cli::cmd_run(rc);
    };

    require(run_into("first", fixture("bigtom_script.json")) == 0, "first run must succeed");
    require(run_into("second", fixture("bigtom_script.json")) == 0, "second run must succeed");
    for (const char* name : {"traces.jsonl", "verdicts.jsonl", "report.json", "report.txt"}) {
        require(read_file(tmp.path / "first" / name) == read_file(tmp.path / "second" / name),
                std::string(name) + " must be byte-identical across reruns");
    }

    // Cold run records into a disk cache; the warm rerun keeps the cache but
    // loses every scripted response, so any provider call would throw.
    auto cache_dir = (tmp.path / "cache").string();
    auto script = nlohmann::json::parse(read_file(fixture("bigtom_script.json")));
    script["cache_dir"] = cache_dir;
    auto cold_config = (tmp.path / "cold_backend.json").string();
    write_file(cold_config, script.dump());

    nlohmann::json warm = {{"type", "scripted"},
                           {"model", script["model"]},
                           {"cache_dir", cache_dir},
                           {"script", nlohmann::json::array()}};
    auto warm_config = (tmp.path / "warm_backend.json").string();
    write_file(warm_config, warm.dump());

    require(run_into("cold", cold_config) == 0, "cache-recording run must succeed");
    require(run_into("warm", warm_config) == 0,
            "warm-cache run must complete with zero provider calls");
    for (const char* name : {"traces.jsonl", "verdicts.jsonl", "report.json"}) {
        require(read_file(tmp.path / "cold" / name) == read_file(tmp.path / "warm" / name),
                std::string(name) + " must be byte-identical between cold and warm runs");
    }
}

// ---------------------------------------------------------------------------
// 9. Distance scoring contract under the orthogonal test embedder.

void check_dist_contract() {
    const std::vector<std::string> references = {
        "Pete does not know where the key is.",
        "Uma thinks the meeting is on Thursday.",
        "They bake bread together.",
    };
    eval::OrthogonalTestEmbedder embedder(32);
    for (const auto& ref : references) {
        auto same = eval::score_dist(ref, ref, {}, embedder, 0.4);
        require(same.correct && same.gold_distance == 0.0,
                "an exact match must be correct at distance zero");

        auto different = eval::score_dist("Something else entirely.", ref, {}, embedder, 0.4);
        require(!different.correct && different.gold_distance == 1.0,
                "a distinct prediction with no wrong answers must be incorrect at distance one");
    }
}

// ---------------------------------------------------------------------------
// 10. Optional live smoke run against a user-supplied endpoint (never gates).

bool check_live_smoke(std::string& detail) {
    const char* env = std::getenv("CCOTOM_SMOKE_BACKEND");
    if (env == nullptr || std::string(env).empty()) {
        detail = "SKIP  live smoke run (set CCOTOM_SMOKE_BACKEND to a backend config; not gating)";
        return true;
    }
    auto examples = datasets::load(fixture("bigtom_synthetic.jsonl"), DatasetFamily::BigToM);
    examples.resize(10);
    auto handle = backend::load_backend(env);
    auto executor = make_executor(handle.model);
    auto traces = executor.run_batch(examples, chain::Method::CCoToM, *handle.backend, 2);

    eval::OrthogonalTestEmbedder embedder;
    std::vector<eval::Verdict> verdicts;
    size_t unparseable = 0;
    for (size_t i = 0; i < examples.size(); ++i) {
        if (traces[i].unparseable) ++unparseable;
        verdicts.push_back(eval::score_answer(examples[i], traces[i].final_answer,
                                              traces[i].unparseable,
                                              traces[i].error.has_value(), embedder));
    }
    auto report = eval::aggregate(examples, verdicts, "ccotom");
    const double rate = static_cast<double>(unparseable) / examples.size();
    std::ostringstream out;
    out << "live smoke run: unparseable rate " << rate << ", accuracy "
        << report.overall_accuracy << " (informational)";
    detail = (rate < 0.2 ? "PASS  " : "FAIL  ") + out.str();
    return rate < 0.2;
}

}  // namespace

int main() {
    struct Check {
        std::string description;
        std::function<void()> fn;
    };
    const std::vector<Check> checks = {
        {"chain shapes and conditioning per family and task", check_chain_shapes},
        {"constraint sentences appear verbatim in prompts", check_constraint_fidelity},
        {"case-study reasoning replay ends on option (a)", check_case_study},
        {"ablations drop steps or constraints, nothing else", check_ablation_semantics},
        {"one-step variant: verbatim instruction, 2 calls vs 3", check_one_step},
        {"token F1 matches an independent oracle exactly", check_token_f1_oracle},
        {"paired aggregation reproduces hand-computed accuracies", check_aggregation_oracle},
        {"reruns are byte-identical; warm cache needs no provider", check_determinism_and_cache},
        {"distance scoring contract under the test embedder", check_dist_contract},
    };

    int failures = 0;
    for (size_t i = 0; i < checks.size(); ++i) {
        std::string line;
        try {
            checks[i].fn();
            line = "PASS  " + checks[i].description;
        } catch (const std::exception& e) {
            ++failures;
            line = "FAIL  " + checks[i].description + ": " + e.what();
        }
        std::cout << "[" << (i + 1) << "/10] " << line << '\n';
    }

    std::string smoke_detail;
    try {
        check_live_smoke(smoke_detail);
    } catch (const std::exception& e) {
        smoke_detail = std::string("FAIL  live smoke run: ") + e.what() + " (not gating)";
    }
    std::cout << "[10/10] " << smoke_detail << '\n';

    if (failures == 0) {
        std::cout << "acceptance: all gating checks passed\n";
    } else {
        std::cout << "acceptance: " << failures << " gating check(s) failed\n";
    }
    return failures;
}
