#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccotom/backend.hpp"
#include "ccotom/constraints.hpp"
#include "ccotom/core.hpp"
#include "ccotom/prompting.hpp"

namespace ccotom::chain {

enum class Method { CCoToM, OneStep, CoT };

const char* to_string(Method m);
std::optional<Method> parse_method(const std::string& s);

enum class StepKind {
    AgentIdentification,
    FactQuestionReconstruction,
    InferDimension,
    FinalAnswer,
};

const char* to_string(StepKind k);
std::optional<StepKind> parse_step_kind(const std::string& s);

/// Chain surgery applied before planning: dropped dimensions lose their
/// inference step and disappear from later conditioning while constraint sets
/// stay untouched; drop_constraints empties every constraint set while the
/// steps stay.
struct AblationConfig {
    std::set<ToMDimension> dropped;
    bool drop_constraints = false;

    bool operator==(const AblationConfig&) const = default;
};

struct PlannedStep {
    StepKind kind = StepKind::InferDimension;
    std::optional<ToMDimension> infer;
    std::vector<ToMDimension> conditioned_on;
    std::vector<std::string> constraint_ids;
    std::string template_id;

    bool operator==(const PlannedStep&) const = default;
};

/// Builds the step plan for one family/task. Throws InvalidAblation when a
/// dropped dimension is not part of the task's related dimensions and
/// StepNotInChain for unsupported family/task combinations.
std::vector<PlannedStep> plan(DatasetFamily family, TaskType task,
                              const AblationConfig& ablation = {});

struct ChainStep {
    StepKind kind = StepKind::InferDimension;
    std::optional<ToMDimension> infer;
    std::string prompt;
    std::string response;
    std::string parsed;

    bool operator==(const ChainStep&) const = default;
};

/// Full record of one example's run: every prompt and response in order, the
/// identified agent, and either a final answer or what went wrong. One
/// ChainStep corresponds to one backend call.
struct ChainTrace {
    std::string example_id;
    Method method = Method::CCoToM;
    std::string model;
    std::string agent;
    std::string fact_question;
    std::vector<ChainStep> steps;
    std::optional<prompting::ParsedAnswer> final_answer;
    bool unparseable = false;
    std::optional<std::string> error;
    std::optional<size_t> error_step;

    bool operator==(const ChainTrace&) const = default;
};

struct ChainSettings {
    std::string model = "default";
    double temperature = 0.0;
    int infer_max_tokens = 512;
    int final_max_tokens = 768;
    AblationConfig ablation;
};

class ChainExecutor {
public:
    ChainExecutor(prompting::TemplateLibrary templates, constraints::ConstraintRegistry registry,
                  ChainSettings settings);

    /// Runs one example. Failures land in the trace; this only throws for
    /// conditions that invalidate the whole run (bad plan, missing template).
    /// Dropped dimensions outside the example's chain are ignored, so one
    /// ablation setting works across a mixed-task dataset.
    ChainTrace execute(const ToMExample& example, Method method,
                       backend::Backend& backend) const;

    /// The single combined prompt of the one-step variant: context, the
    /// deduplicated union of the plan's constraints, the question, and the
    /// chain collapsed into one instruction.
    std::string one_step_prompt(const ToMExample& example, const std::string& agent) const;

    /// Runs examples across a worker pool. Results keep input order and a
    /// failing example never aborts the batch.
    std::vector<ChainTrace> run_batch(const std::vector<ToMExample>& examples, Method method,
                                      backend::Backend& backend, int workers) const;

    const ChainSettings& settings() const { return settings_; }

private:
    ChainTrace run_constrained_chain(const ToMExample& example, backend::Backend& backend) const;
    ChainTrace run_one_step(const ToMExample& example, backend::Backend& backend) const;
    ChainTrace run_cot(const ToMExample& example, backend::Backend& backend) const;

    prompting::TemplateLibrary templates_;
    constraints::ConstraintRegistry registry_;
    ChainSettings settings_;
};

nlohmann::json trace_to_json(const ChainTrace& trace);
ChainTrace trace_from_json(const nlohmann::json& j);

}  // namespace ccotom::chain
