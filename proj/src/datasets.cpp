#include "ccotom/datasets.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "ccotom/errors.hpp"

using nlohmann::json;

namespace ccotom::datasets {

namespace {

const json& require(const json& row, const char* field, size_t line) {
    auto it = row.find(field);
    if (it == row.end()) throw SchemaError(line, field, "missing");
    return *it;
}

std::string require_string(const json& row, const char* field, size_t line) {
    const json& v = require(row, field, line);
    if (!v.is_string()) throw SchemaError(line, field, "expected a string");
    std::string s = v.get<std::string>();
    if (s.empty()) throw SchemaError(line, field, "empty");
    return s;
}

ToMExample parse_narrative_row(const json& row, size_t line) {
    ToMExample ex;
    ex.family = DatasetFamily::BigToM;
    ex.id = require_string(row, "id", line);
    ex.pair_id = require_string(row, "pair_id", line);

    auto task = parse_task(require_string(row, "task", line));
    if (!task) throw SchemaError(line, "task", "expected forward_belief, forward_action or backward_belief");
    ex.task = *task;

    auto condition = parse_condition(require_string(row, "condition", line));
    if (!condition) throw SchemaError(line, "condition", "expected true_belief or false_belief");
    ex.condition = *condition;

    ex.context = Context::make_narrative(require_string(row, "story", line));

    ex.question.text = require_string(row, "question", line);
    ex.question.format = QuestionFormat::MultipleChoice;
    const json& options = require(row, "options", line);
    if (!options.is_array() || options.size() < 2)
        throw SchemaError(line, "options", "expected an array of at least two strings");
    for (const auto& opt : options) {
        if (!opt.is_string() || opt.get<std::string>().empty())
            throw SchemaError(line, "options", "expected non-empty strings");
        ex.question.options.push_back(opt.get<std::string>());
    }

    const json& answer_index = require(row, "answer_index", line);
    if (!answer_index.is_number_integer()) throw SchemaError(line, "answer_index", "expected an integer");
    const int idx = answer_index.get<int>();
    if (idx < 0 || idx >= static_cast<int>(ex.question.options.size()))
        throw SchemaError(line, "answer_index", "out of range");
    ex.gold.option_index = idx;
    ex.gold.reference_text = ex.question.options[idx];

    if (row.contains("agent_hint")) ex.question.target_agent_hint = require_string(row, "agent_hint", line);
    return ex;
}

ToMExample parse_conversation_row(const json& row, size_t line) {
    ToMExample ex;
    ex.family = DatasetFamily::Fantom;
    ex.task = TaskType::ForwardBelief;
    ex.id = require_string(row, "id", line);

    auto scope = parse_scope(require_string(row, "scope", line));
    if (!scope) throw SchemaError(line, "scope", "expected short or full");
    ex.scope = *scope;

    auto qtype = parse_qtype(require_string(row, "qtype", line));
    if (!qtype) throw SchemaError(line, "qtype", "expected choice or dist");

    const json& turns = require(row, "turns", line);
    if (!turns.is_array() || turns.empty()) throw SchemaError(line, "turns", "expected a non-empty array");
    std::vector<Turn> parsed;
    for (const auto& t : turns) {
        if (!t.is_object()) throw SchemaError(line, "turns", "expected objects");
        Turn turn;
        turn.speaker = require_string(t, "speaker", line);
        const json& text = require(t, "text", line);
        if (!text.is_string()) throw SchemaError(line, "text", "expected a string");
        turn.utterance = text.get<std::string>();
        parsed.push_back(std::move(turn));
    }
    ex.context = Context::make_conversation(std::move(parsed));

    ex.question.text = require_string(row, "question", line);
    const std::string answer = require_string(row, "answer", line);
    ex.gold.reference_text = answer;
    if (row.contains("wrong_answers")) {
        const json& wrong = row["wrong_answers"];
        if (!wrong.is_array()) throw SchemaError(line, "wrong_answers", "expected an array");
        for (const auto& w : wrong) {
            if (!w.is_string() || w.get<std::string>().empty())
                throw SchemaError(line, "wrong_answers", "expected non-empty strings");
            ex.gold.wrong_answers.push_back(w.get<std::string>());
        }
    }

    if (*qtype == QType::Choice) {
        if (ex.gold.wrong_answers.empty())
            throw SchemaError(line, "wrong_answers", "choice rows need at least one wrong answer");
        ex.question.format = QuestionFormat::MultipleChoice;
        std::vector<std::string> options = ex.gold.wrong_answers;
        options.push_back(answer);
        std::sort(options.begin(), options.end());
        ex.question.options = options;
        ex.gold.option_index = static_cast<int>(
            std::find(options.begin(), options.end(), answer) - options.begin());
    } else {
        ex.question.format = QuestionFormat::FreeForm;
    }

    if (row.contains("agent_hint")) ex.question.target_agent_hint = require_string(row, "agent_hint", line);
    return ex;
}

void load_into(const std::string& path, DatasetFamily family,
               std::vector<ToMExample>& out, std::vector<std::string>* diagnostics) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read dataset: " + path);

    std::map<std::string, size_t> seen_ids;
    std::map<std::pair<std::string, Condition>, size_t> seen_conditions;
    std::string text;
    size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json row;
            try {
                row = json::parse(text);
            } catch (const json::exception& e) {
                throw SchemaError(line, "", std::string("not valid json: ") + e.what());
            }
            if (!row.is_object()) throw SchemaError(line, "", "expected a json object");

            ToMExample ex = family == DatasetFamily::BigToM ? parse_narrative_row(row, line)
                                                            : parse_conversation_row(row, line);
            if (auto it = seen_ids.find(ex.id); it != seen_ids.end())
                throw DuplicateId(line, ex.id);
            seen_ids.emplace(ex.id, line);
            if (ex.pair_id && ex.condition) {
                auto key = std::make_pair(*ex.pair_id, *ex.condition);
                if (seen_conditions.count(key))
                    throw BrokenPair(line, *ex.pair_id, to_string(*ex.condition));
                seen_conditions.emplace(key, line);
            }
            ex.validate();
            out.push_back(std::move(ex));
        } catch (const Error& e) {
            if (!diagnostics) throw;
            diagnostics->push_back(e.what());
        } catch (const std::invalid_argument& e) {
            if (!diagnostics) throw;
            diagnostics->push_back("line " + std::to_string(line) + ": " + e.what());
        }
    }
}

}  // namespace

std::vector<ToMExample> load(const std::string& path, DatasetFamily family) {
    std::vector<ToMExample> out;
    load_into(path, family, out, nullptr);
    return out;
}

std::vector<std::string> validate_file(const std::string& path, DatasetFamily family) {
    std::vector<ToMExample> out;
    std::vector<std::string> diagnostics;
    load_into(path, family, out, &diagnostics);
    return diagnostics;
}

Pairing pair_conditions(const std::vector<ToMExample>& examples) {
    Pairing out;
    std::map<std::string, std::pair<int, int>> by_pair;  // pair_id -> (tb index, fb index)
    std::vector<std::string> order;
    for (size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        if (!ex.pair_id || !ex.condition) {
            out.unpaired.push_back(i);
            continue;
        }
        auto [it, inserted] = by_pair.emplace(*ex.pair_id, std::make_pair(-1, -1));
        if (inserted) order.push_back(*ex.pair_id);
        if (*ex.condition == Condition::TrueBelief)
            it->second.first = static_cast<int>(i);
        else
            it->second.second = static_cast<int>(i);
    }
    for (const auto& id : order) {
        const auto& [tb, fb] = by_pair.at(id);
        if (tb >= 0 && fb >= 0) {
            out.pairs.push_back({id, static_cast<size_t>(tb), static_cast<size_t>(fb)});
        } else {
            out.unpaired.push_back(static_cast<size_t>(tb >= 0 ? tb : fb));
        }
    }
    std::sort(out.unpaired.begin(), out.unpaired.end());
    return out;
}

std::vector<ToMExample> by_task(const std::vector<ToMExample>& examples, TaskType task) {
    std::vector<ToMExample> out;
    std::copy_if(examples.begin(), examples.end(), std::back_inserter(out),
                 [&](const ToMExample& e) { return e.task == task; });
    return out;
}

std::vector<ToMExample> by_condition(const std::vector<ToMExample>& examples, Condition condition) {
    std::vector<ToMExample> out;
    std::copy_if(examples.begin(), examples.end(), std::back_inserter(out),
                 [&](const ToMExample& e) { return e.condition == condition; });
    return out;
}

std::vector<ToMExample> by_scope(const std::vector<ToMExample>& examples, ConversationScope scope) {
    std::vector<ToMExample> out;
    std::copy_if(examples.begin(), examples.end(), std::back_inserter(out),
                 [&](const ToMExample& e) { return e.scope == scope; });
    return out;
}

std::vector<ToMExample> by_format(const std::vector<ToMExample>& examples, QuestionFormat format) {
    std::vector<ToMExample> out;
    std::copy_if(examples.begin(), examples.end(), std::back_inserter(out),
                 [&](const ToMExample& e) { return e.question.format == format; });
    return out;
}

json example_to_json(const ToMExample& ex) {
    json j;
    j["id"] = ex.id;
    j["family"] = to_string(ex.family);
    j["task"] = to_string(ex.task);
    if (ex.condition) j["condition"] = to_string(*ex.condition);
    if (ex.pair_id) j["pair_id"] = *ex.pair_id;
    if (ex.scope) j["scope"] = to_string(*ex.scope);

    if (ex.context.kind == ContextKind::Narrative) {
        j["context"] = {{"kind", "narrative"}, {"text", ex.context.narrative}};
    } else {
        json turns = json::array();
        for (const auto& t : ex.context.turns)
            turns.push_back({{"speaker", t.speaker}, {"text", t.utterance}});
        j["context"] = {{"kind", "conversation"}, {"turns", turns}};
    }

    json q;
    q["text"] = ex.question.text;
    q["format"] = ex.question.format == QuestionFormat::MultipleChoice ? "multiple_choice" : "free_form";
    if (!ex.question.options.empty()) q["options"] = ex.question.options;
    if (ex.question.target_agent_hint) q["agent_hint"] = *ex.question.target_agent_hint;
    j["question"] = q;

    json g;
    if (ex.gold.option_index >= 0) g["option_index"] = ex.gold.option_index;
    if (!ex.gold.reference_text.empty()) g["reference_text"] = ex.gold.reference_text;
    if (!ex.gold.wrong_answers.empty()) g["wrong_answers"] = ex.gold.wrong_answers;
    j["gold"] = g;
    return j;
}

ToMExample example_from_json(const json& j) {
    ToMExample ex;
    ex.id = j.at("id").get<std::string>();
    ex.family = j.at("family").get<std::string>() == "fantom" ? DatasetFamily::Fantom
                                                              : DatasetFamily::BigToM;
    auto task = parse_task(j.at("task").get<std::string>());
    if (!task) throw SchemaError(0, "task", "unknown task");
    ex.task = *task;
    if (j.contains("condition")) ex.condition = parse_condition(j["condition"].get<std::string>());
    if (j.contains("pair_id")) ex.pair_id = j["pair_id"].get<std::string>();
    if (j.contains("scope")) ex.scope = parse_scope(j["scope"].get<std::string>());

    const json& ctx = j.at("context");
    if (ctx.at("kind").get<std::string>() == "narrative") {
        ex.context = Context::make_narrative(ctx.at("text").get<std::string>());
    } else {
        std::vector<Turn> turns;
        for (const auto& t : ctx.at("turns"))
            turns.push_back({t.at("speaker").get<std::string>(), t.at("text").get<std::string>()});
        ex.context = Context::make_conversation(std::move(turns));
    }

    const json& q = j.at("question");
    ex.question.text = q.at("text").get<std::string>();
    ex.question.format = q.at("format").get<std::string>() == "free_form"
                             ? QuestionFormat::FreeForm
                             : QuestionFormat::MultipleChoice;
    if (q.contains("options")) ex.question.options = q["options"].get<std::vector<std::string>>();
    if (q.contains("agent_hint")) ex.question.target_agent_hint = q["agent_hint"].get<std::string>();

    const json& g = j.at("gold");
    ex.gold.option_index = g.value("option_index", -1);
    ex.gold.reference_text = g.value("reference_text", std::string());
    if (g.contains("wrong_answers"))
        ex.gold.wrong_answers = g["wrong_answers"].get<std::vector<std::string>>();
    return ex;
}

const ToMExample& find_example(const std::vector<ToMExample>& examples, const std::string& id) {
    for (const auto& ex : examples) {
        if (ex.id == id) return ex;
    }
    throw UnknownExampleId(id);
}

}  // namespace ccotom::datasets
