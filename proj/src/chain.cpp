#include "ccotom/chain.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <sstream>
#include <thread>

#include "ccotom/errors.hpp"

using nlohmann::json;

namespace ccotom::chain {

const char* to_string(Method m) {
    switch (m) {
        case Method::CCoToM: return "ccotom";
        case Method::OneStep: return "onestep";
        case Method::CoT: return "cot";
    }
    return "?";
}

std::optional<Method> parse_method(const std::string& s) {
    if (s == "ccotom") return Method::CCoToM;
    if (s == "onestep") return Method::OneStep;
    if (s == "cot") return Method::CoT;
    return std::nullopt;
}

const char* to_string(StepKind k) {
    switch (k) {
        case StepKind::AgentIdentification: return "agent_identification";
        case StepKind::FactQuestionReconstruction: return "fact_question_reconstruction";
        case StepKind::InferDimension: return "infer_dimension";
        case StepKind::FinalAnswer: return "final_answer";
    }
    return "?";
}

std::optional<StepKind> parse_step_kind(const std::string& s) {
    if (s == "agent_identification") return StepKind::AgentIdentification;
    if (s == "fact_question_reconstruction") return StepKind::FactQuestionReconstruction;
    if (s == "infer_dimension") return StepKind::InferDimension;
    if (s == "final_answer") return StepKind::FinalAnswer;
    return std::nullopt;
}

namespace {

std::string infer_template_id(TaskType task, ToMDimension dim) {
    using D = ToMDimension;
    switch (dim) {
        case D::Percept: return "bigtom_percept";
        case D::Belief: return "bigtom_belief_related";
        case D::Desire: return "bigtom_desire";
        case D::Action: return "bigtom_action_related";
    }
    (void)task;
    return "";
}

std::string final_template_id(TaskType task) {
    switch (task) {
        case TaskType::ForwardBelief: return "bigtom_belief_final";
        case TaskType::ForwardAction: return "bigtom_action_final";
        case TaskType::BackwardBelief: return "bigtom_belief_backward_final";
    }
    return "";
}

std::vector<std::string> constraint_ids(const constraints::ConstraintRegistry& registry,
                                        DatasetFamily family, TaskType task, ToMDimension dim) {
    std::vector<std::string> ids;
    for (const auto& spec : registry.select(family, task, dim)) ids.push_back(spec.id);
    return ids;
}

}  // namespace

std::vector<PlannedStep> plan(DatasetFamily family, TaskType task, const AblationConfig& ablation) {
    const auto related = related_dimensions(task);
    for (ToMDimension d : ablation.dropped) {
        if (std::find(related.begin(), related.end(), d) == related.end())
            throw InvalidAblation(std::string("cannot drop ") + to_string(d) + " from " +
                                  to_string(task));
    }
    if (family == DatasetFamily::Fantom && task != TaskType::ForwardBelief)
        throw StepNotInChain(to_string(family), to_string(task), to_string(queried_dimension(task)));

    const auto registry = constraints::ConstraintRegistry::builtin();
    const auto dropped = [&](ToMDimension d) { return ablation.dropped.count(d) != 0; };

    std::vector<PlannedStep> steps;
    steps.push_back({StepKind::AgentIdentification, std::nullopt, {}, {}, ""});

    if (family == DatasetFamily::Fantom) {
        steps.push_back({StepKind::FactQuestionReconstruction, std::nullopt, {}, {}, ""});
        if (!dropped(ToMDimension::Percept)) {
            steps.push_back({StepKind::InferDimension, ToMDimension::Percept, {},
                             constraint_ids(registry, family, task, ToMDimension::Percept),
                             "fantom_percept"});
        }
        std::vector<ToMDimension> cond;
        if (!dropped(ToMDimension::Percept)) cond.push_back(ToMDimension::Percept);
        steps.push_back({StepKind::FinalAnswer, ToMDimension::Belief, cond,
                         constraint_ids(registry, family, task, ToMDimension::Belief),
                         "fantom_belief_final"});
    } else {
        std::vector<ToMDimension> inferred;
        for (ToMDimension dim : related) {
            if (dropped(dim)) continue;
            std::vector<ToMDimension> cond;
            for (ToMDimension prior : inferred) {
                if (CausalGraph::instance().has_edge(prior, dim)) cond.push_back(prior);
            }
            steps.push_back({StepKind::InferDimension, dim, cond,
                             constraint_ids(registry, family, task, dim),
                             infer_template_id(task, dim)});
            inferred.push_back(dim);
        }
        std::vector<ToMDimension> cond;
        for (ToMDimension dim : final_conditioning(task)) {
            if (!dropped(dim)) cond.push_back(dim);
        }
        steps.push_back({StepKind::FinalAnswer, queried_dimension(task), cond,
                         constraint_ids(registry, family, task, queried_dimension(task)),
                         final_template_id(task)});
    }

    if (ablation.drop_constraints) {
        for (auto& step : steps) step.constraint_ids.clear();
    }
    return steps;
}

ChainExecutor::ChainExecutor(prompting::TemplateLibrary templates,
                             constraints::ConstraintRegistry registry, ChainSettings settings)
    : templates_(std::move(templates)),
      registry_(std::move(registry)),
      settings_(std::move(settings)) {}

namespace {

const char* response_placeholder(ToMDimension d) {
    switch (d) {
        case ToMDimension::Percept: return "percept_response";
        case ToMDimension::Belief: return "belief_response";
        case ToMDimension::Desire: return "desire_response";
        case ToMDimension::Action: return "action_response";
    }
    return "";
}

std::string parsed_or_raw(const std::string& raw) {
    std::string parsed = prompting::parse_dimension_response(raw);
    return parsed.empty() ? raw : parsed;
}

}  // namespace

ChainTrace ChainExecutor::run_constrained_chain(const ToMExample& example,
                                                backend::Backend& backend) const {
    ChainTrace trace;
    trace.example_id = example.id;
    trace.method = Method::CCoToM;
    trace.model = settings_.model;

    AblationConfig effective;
    effective.drop_constraints = settings_.ablation.drop_constraints;
    const auto related = related_dimensions(example.task);
    for (ToMDimension d : settings_.ablation.dropped) {
        if (std::find(related.begin(), related.end(), d) != related.end())
            effective.dropped.insert(d);
    }
    const auto steps = plan(example.family, example.task, effective);
    const std::string context = render_context(example.context);

    backend::BackendRequest request;
    request.model = settings_.model;
    request.temperature = settings_.temperature;

    auto call = [&](StepKind kind, std::optional<ToMDimension> infer, const std::string& prompt,
                    int max_tokens) -> std::string {
        ChainStep step;
        step.kind = kind;
        step.infer = infer;
        step.prompt = prompt;
        trace.steps.push_back(step);
        request.prompt = prompt;
        request.max_tokens = max_tokens;
        const std::string raw = backend.complete(request).text;
        trace.steps.back().response = raw;
        return raw;
    };

    std::map<ToMDimension, std::string> responses;
    try {
        for (const auto& planned : steps) {
            switch (planned.kind) {
                case StepKind::AgentIdentification: {
                    const std::string prompt =
                        prompting::agent_identification_prompt(example.question, example.task);
                    const std::string raw =
                        call(planned.kind, std::nullopt, prompt, settings_.infer_max_tokens);
                    trace.agent = prompting::parse_agent(raw);
                    trace.steps.back().parsed = trace.agent;
                    break;
                }
                case StepKind::FactQuestionReconstruction: {
                    const std::string info_prompt =
                        prompting::fact_info_prompt(context, example.question, trace.agent);
                    const std::string info = parsed_or_raw(
                        call(planned.kind, std::nullopt, info_prompt, settings_.infer_max_tokens));
                    trace.steps.back().parsed = info;

                    const std::string question_prompt =
                        prompting::fact_question_from_info_prompt(info);
                    trace.fact_question = parsed_or_raw(call(planned.kind, std::nullopt,
                                                             question_prompt,
                                                             settings_.infer_max_tokens));
                    trace.steps.back().parsed = trace.fact_question;
                    break;
                }
                case StepKind::InferDimension:
                case StepKind::FinalAnswer: {
                    std::map<std::string, std::string> bindings;
                    bindings["context"] = context;
                    bindings["agent"] = trace.agent;
                    if (!planned.constraint_ids.empty()) {
                        std::vector<constraints::ConstraintSpec> specs;
                        for (const auto& id : planned.constraint_ids)
                            specs.push_back(registry_.get(id));
                        bindings["constraints"] =
                            constraints::render_constraints(specs, trace.agent);
                    }
                    for (ToMDimension dim : planned.conditioned_on)
                        bindings[response_placeholder(dim)] = responses.at(dim);
                    if (example.family == DatasetFamily::Fantom)
                        bindings["fact_question"] = trace.fact_question;

                    const bool final = planned.kind == StepKind::FinalAnswer;
                    if (final) {
                        bindings["question"] = prompting::render_question(example.question);
                        bindings["answer_format"] =
                            prompting::answer_format_instruction(example.question.format);
                    }
                    const std::string prompt =
                        templates_.get(planned.template_id).render(bindings);
                    const std::string raw =
                        call(planned.kind, planned.infer, prompt,
                             final ? settings_.final_max_tokens : settings_.infer_max_tokens);
                    if (final) {
                        try {
                            trace.final_answer =
                                prompting::parse_final_answer(raw, example.question);
                            trace.steps.back().parsed = trace.final_answer->text;
                        } catch (const UnparseableChoice&) {
                            trace.unparseable = true;
                        }
                    } else {
                        const std::string parsed = parsed_or_raw(raw);
                        responses[*planned.infer] = parsed;
                        trace.steps.back().parsed = parsed;
                    }
                    break;
                }
            }
        }
    } catch (const std::exception& e) {
        trace.error = e.what();
        trace.error_step = trace.steps.empty() ? 0 : trace.steps.size() - 1;
    }
    return trace;
}

std::string ChainExecutor::one_step_prompt(const ToMExample& example,
                                           const std::string& agent) const {
    const auto steps = plan(example.family, example.task, {});

    std::vector<constraints::ConstraintSpec> specs;
    std::vector<std::string> seen;
    for (const auto& step : steps) {
        for (const auto& id : step.constraint_ids) {
            if (std::find(seen.begin(), seen.end(), id) != seen.end()) continue;
            seen.push_back(id);
            specs.push_back(registry_.get(id));
        }
    }

    std::string instruction_id;
    if (example.family == DatasetFamily::Fantom) {
        instruction_id = "onestep_fantom";
    } else {
        switch (example.task) {
            case TaskType::ForwardBelief: instruction_id = "onestep_fb"; break;
            case TaskType::ForwardAction: instruction_id = "onestep_fa"; break;
            case TaskType::BackwardBelief: instruction_id = "onestep_bb"; break;
        }
    }
    const std::string instruction = templates_.get(instruction_id).render({{"agent", agent}});

    std::ostringstream out;
    if (example.context.kind == ContextKind::Conversation)
        out << "Conversation:\n" << render_context(example.context);
    else
        out << "Story: " << render_context(example.context);
    out << "\n\n" << constraints::render_constraints(specs, agent);
    out << "\n\n" << "Question: " << prompting::render_question(example.question);
    out << "\n\n" << instruction;
    out << '\n' << prompting::answer_format_instruction(example.question.format);
    return out.str();
}

ChainTrace ChainExecutor::run_one_step(const ToMExample& example,
                                       backend::Backend& backend) const {
    ChainTrace trace;
    trace.example_id = example.id;
    trace.method = Method::OneStep;
    trace.model = settings_.model;

    backend::BackendRequest request;
    request.model = settings_.model;
    request.temperature = settings_.temperature;

    try {
        ChainStep id_step;
        id_step.kind = StepKind::AgentIdentification;
        id_step.prompt = prompting::agent_identification_prompt(example.question, example.task);
        trace.steps.push_back(id_step);
        request.prompt = trace.steps.back().prompt;
        request.max_tokens = settings_.infer_max_tokens;
        trace.steps.back().response = backend.complete(request).text;
        trace.agent = prompting::parse_agent(trace.steps.back().response);
        trace.steps.back().parsed = trace.agent;

        ChainStep final_step;
        final_step.kind = StepKind::FinalAnswer;
        final_step.infer = queried_dimension(example.task);
        final_step.prompt = one_step_prompt(example, trace.agent);
        trace.steps.push_back(final_step);
        request.prompt = trace.steps.back().prompt;
        request.max_tokens = settings_.final_max_tokens;
        trace.steps.back().response = backend.complete(request).text;
        try {
            trace.final_answer =
                prompting::parse_final_answer(trace.steps.back().response, example.question);
            trace.steps.back().parsed = trace.final_answer->text;
        } catch (const UnparseableChoice&) {
            trace.unparseable = true;
        }
    } catch (const std::exception& e) {
        trace.error = e.what();
        trace.error_step = trace.steps.empty() ? 0 : trace.steps.size() - 1;
    }
    return trace;
}

ChainTrace ChainExecutor::run_cot(const ToMExample& example, backend::Backend& backend) const {
    ChainTrace trace;
    trace.example_id = example.id;
    trace.method = Method::CoT;
    trace.model = settings_.model;

    try {
        std::map<std::string, std::string> bindings;
        bindings["context"] = render_context(example.context);
        bindings["question"] = prompting::render_question(example.question);
        bindings["answer_format"] = prompting::answer_format_instruction(example.question.format);

        ChainStep step;
        step.kind = StepKind::FinalAnswer;
        step.infer = queried_dimension(example.task);
        step.prompt = templates_.get("cot").render(bindings);
        trace.steps.push_back(step);

        backend::BackendRequest request;
        request.model = settings_.model;
        request.temperature = settings_.temperature;
        request.prompt = trace.steps.back().prompt;
        request.max_tokens = settings_.final_max_tokens;
        trace.steps.back().response = backend.complete(request).text;
        try {
            trace.final_answer =
                prompting::parse_final_answer(trace.steps.back().response, example.question);
            trace.steps.back().parsed = trace.final_answer->text;
        } catch (const UnparseableChoice&) {
            trace.unparseable = true;
        }
    } catch (const std::exception& e) {
        trace.error = e.what();
        trace.error_step = trace.steps.empty() ? 0 : trace.steps.size() - 1;
    }
    return trace;
}

ChainTrace ChainExecutor::execute(const ToMExample& example, Method method,
                                  backend::Backend& backend) const {
    switch (method) {
        case Method::CCoToM: return run_constrained_chain(example, backend);
        case Method::OneStep: return run_one_step(example, backend);
        case Method::CoT: return run_cot(example, backend);
    }
    throw Error("unknown method");
}

std::vector<ChainTrace> ChainExecutor::run_batch(const std::vector<ToMExample>& examples,
                                                 Method method, backend::Backend& backend,
                                                 int workers) const {
    std::vector<ChainTrace> results(examples.size());
    if (examples.empty()) return results;
    const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(examples.size())));
    std::atomic<size_t> next{0};
    auto drain = [&] {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= examples.size()) return;
            results[i] = execute(examples[i], method, backend);
        }
    };
    std::vector<std::thread> pool;
    for (int i = 1; i < n_workers; ++i) pool.emplace_back(drain);
    drain();
    for (auto& t : pool) t.join();
    return results;
}

json trace_to_json(const ChainTrace& trace) {
    json j;
    j["example_id"] = trace.example_id;
    j["method"] = to_string(trace.method);
    j["model"] = trace.model;
    j["agent"] = trace.agent;
    if (!trace.fact_question.empty()) j["fact_question"] = trace.fact_question;
    json steps = json::array();
    for (const auto& s : trace.steps) {
        json sj;
        sj["kind"] = to_string(s.kind);
        if (s.infer) sj["infer"] = to_string(*s.infer);
        sj["prompt"] = s.prompt;
        sj["response"] = s.response;
        sj["parsed"] = s.parsed;
        steps.push_back(sj);
    }
    j["steps"] = steps;
    if (trace.final_answer) {
        json f;
        f["format"] = trace.final_answer->format == QuestionFormat::MultipleChoice
                          ? "multiple_choice"
                          : "free_form";
        if (trace.final_answer->option_index >= 0)
            f["option_index"] = trace.final_answer->option_index;
        f["text"] = trace.final_answer->text;
        j["final"] = f;
    }
    j["unparseable"] = trace.unparseable;
    if (trace.error) {
        j["error"] = *trace.error;
        j["error_step"] = *trace.error_step;
    }
    return j;
}

ChainTrace trace_from_json(const json& j) {
    ChainTrace trace;
    trace.example_id = j.at("example_id").get<std::string>();
    auto method = parse_method(j.at("method").get<std::string>());
    if (!method) throw Error("trace has unknown method");
    trace.method = *method;
    trace.model = j.value("model", std::string());
    trace.agent = j.value("agent", std::string());
    trace.fact_question = j.value("fact_question", std::string());
    for (const auto& sj : j.value("steps", json::array())) {
        ChainStep s;
        auto kind = parse_step_kind(sj.at("kind").get<std::string>());
        if (!kind) throw Error("trace step has unknown kind");
        s.kind = *kind;
        if (sj.contains("infer")) s.infer = parse_dimension(sj["infer"].get<std::string>());
        s.prompt = sj.value("prompt", std::string());
        s.response = sj.value("response", std::string());
        s.parsed = sj.value("parsed", std::string());
        trace.steps.push_back(std::move(s));
    }
    if (j.contains("final")) {
        prompting::ParsedAnswer f;
        f.format = j["final"].value("format", std::string()) == "free_form"
                       ? QuestionFormat::FreeForm
                       : QuestionFormat::MultipleChoice;
        f.option_index = j["final"].value("option_index", -1);
        f.text = j["final"].value("text", std::string());
        trace.final_answer = f;
    }
    trace.unparseable = j.value("unparseable", false);
    if (j.contains("error")) {
        trace.error = j["error"].get<std::string>();
        trace.error_step = j.value("error_step", 0);
    }
    return trace;
}

}  // namespace ccotom::chain
