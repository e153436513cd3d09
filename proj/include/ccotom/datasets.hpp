#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ccotom/core.hpp"

namespace ccotom::datasets {

/// Loads a JSONL benchmark file. Narrative rows carry
/// {id, pair_id, task, condition, story, question, options, answer_index};
/// conversation rows carry {id, scope, qtype, turns, question, answer,
/// wrong_answers}. Throws SchemaError/DuplicateId/BrokenPair with the
/// offending line number.
std::vector<ToMExample> load(const std::string& path, DatasetFamily family);

/// Like load, but collects every diagnostic instead of throwing. Returns an
/// empty vector when the file is clean.
std::vector<std::string> validate_file(const std::string& path, DatasetFamily family);

struct Pair {
    std::string pair_id;
    size_t true_belief;   // index into the example vector
    size_t false_belief;  // index into the example vector
};

struct Pairing {
    std::vector<Pair> pairs;
    std::vector<size_t> unpaired;
};

/// Groups examples into true-belief/false-belief pairs by pair_id. Examples
/// without a pair id or without a counterpart land in unpaired.
Pairing pair_conditions(const std::vector<ToMExample>& examples);

std::vector<ToMExample> by_task(const std::vector<ToMExample>& examples, TaskType task);
std::vector<ToMExample> by_condition(const std::vector<ToMExample>& examples, Condition condition);
std::vector<ToMExample> by_scope(const std::vector<ToMExample>& examples, ConversationScope scope);
std::vector<ToMExample> by_format(const std::vector<ToMExample>& examples, QuestionFormat format);

/// Canonical JSON form of an example; from_json inverts it exactly.
nlohmann::json example_to_json(const ToMExample& example);
ToMExample example_from_json(const nlohmann::json& j);

/// Looks up an example by id. Throws UnknownExampleId.
const ToMExample& find_example(const std::vector<ToMExample>& examples, const std::string& id);

}  // namespace ccotom::datasets
