#include "ccotom/core.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace ccotom {

const char* to_string(ToMDimension d) {
    switch (d) {
        case ToMDimension::Percept: return "Percept";
        case ToMDimension::Belief: return "Belief";
        case ToMDimension::Desire: return "Desire";
        case ToMDimension::Action: return "Action";
    }
    return "?";
}

const char* to_string(TaskType t) {
    switch (t) {
        case TaskType::ForwardBelief: return "forward_belief";
        case TaskType::ForwardAction: return "forward_action";
        case TaskType::BackwardBelief: return "backward_belief";
    }
    return "?";
}

const char* to_string(Condition c) {
    switch (c) {
        case Condition::TrueBelief: return "true_belief";
        case Condition::FalseBelief: return "false_belief";
    }
    return "?";
}

const char* to_string(DatasetFamily f) {
    switch (f) {
        case DatasetFamily::BigToM: return "bigtom";
        case DatasetFamily::Fantom: return "fantom";
    }
    return "?";
}

const char* to_string(ConversationScope s) {
    switch (s) {
        case ConversationScope::Short: return "short";
        case ConversationScope::Full: return "full";
    }
    return "?";
}

const char* to_string(QType q) {
    switch (q) {
        case QType::Choice: return "choice";
        case QType::Dist: return "dist";
    }
    return "?";
}

std::string dimension_word(ToMDimension d) {
    std::string word = to_string(d);
    std::transform(word.begin(), word.end(), word.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return word;
}

std::optional<ToMDimension> parse_dimension(const std::string& s) {
    if (s == "Percept" || s == "percept") return ToMDimension::Percept;
    if (s == "Belief" || s == "belief") return ToMDimension::Belief;
    if (s == "Desire" || s == "desire") return ToMDimension::Desire;
    if (s == "Action" || s == "action") return ToMDimension::Action;
    return std::nullopt;
}

std::optional<TaskType> parse_task(const std::string& s) {
    if (s == "ForwardBelief" || s == "forward_belief") return TaskType::ForwardBelief;
    if (s == "ForwardAction" || s == "forward_action") return TaskType::ForwardAction;
    if (s == "BackwardBelief" || s == "backward_belief") return TaskType::BackwardBelief;
    return std::nullopt;
}

std::optional<Condition> parse_condition(const std::string& s) {
    if (s == "TrueBelief" || s == "true_belief") return Condition::TrueBelief;
    if (s == "FalseBelief" || s == "false_belief") return Condition::FalseBelief;
    return std::nullopt;
}

std::optional<ConversationScope> parse_scope(const std::string& s) {
    if (s == "short") return ConversationScope::Short;
    if (s == "full") return ConversationScope::Full;
    return std::nullopt;
}

std::optional<QType> parse_qtype(const std::string& s) {
    if (s == "choice") return QType::Choice;
    if (s == "dist") return QType::Dist;
    return std::nullopt;
}

CausalGraph::CausalGraph()
    : edges_{{ToMDimension::Percept, ToMDimension::Belief},
             {ToMDimension::Belief, ToMDimension::Action},
             {ToMDimension::Desire, ToMDimension::Action}} {}

const CausalGraph& CausalGraph::instance() {
    static const CausalGraph graph;
    return graph;
}

std::vector<ToMDimension> CausalGraph::parents(ToMDimension d) const {
    std::vector<ToMDimension> out;
    for (const auto& [from, to] : edges_) {
        if (to == d) out.push_back(from);
    }
    return out;
}

bool CausalGraph::has_edge(ToMDimension from, ToMDimension to) const {
    return std::find(edges_.begin(), edges_.end(), std::make_pair(from, to)) != edges_.end();
}

ToMDimension queried_dimension(TaskType task) {
    switch (task) {
        case TaskType::ForwardBelief: return ToMDimension::Belief;
        case TaskType::ForwardAction: return ToMDimension::Action;
        case TaskType::BackwardBelief: return ToMDimension::Belief;
    }
    throw std::logic_error("unknown task");
}

std::vector<ToMDimension> related_dimensions(TaskType task) {
    switch (task) {
        case TaskType::ForwardBelief:
            return {ToMDimension::Percept};
        case TaskType::ForwardAction:
            return {ToMDimension::Percept, ToMDimension::Belief, ToMDimension::Desire};
        case TaskType::BackwardBelief:
            return {ToMDimension::Desire, ToMDimension::Action};
    }
    throw std::logic_error("unknown task");
}

std::vector<ToMDimension> final_conditioning(TaskType task) {
    switch (task) {
        case TaskType::ForwardBelief:
            return {ToMDimension::Percept};
        case TaskType::ForwardAction:
            return {ToMDimension::Belief, ToMDimension::Desire};
        case TaskType::BackwardBelief:
            return {ToMDimension::Action, ToMDimension::Desire};
    }
    throw std::logic_error("unknown task");
}

Context Context::make_narrative(std::string text) {
    Context c;
    c.kind = ContextKind::Narrative;
    c.narrative = std::move(text);
    return c;
}

Context Context::make_conversation(std::vector<Turn> turns) {
    Context c;
    c.kind = ContextKind::Conversation;
    c.turns = std::move(turns);
    return c;
}

void Context::validate() const {
    if (kind == ContextKind::Narrative) {
        if (!turns.empty()) throw std::invalid_argument("narrative context carries turns");
        if (narrative.empty()) throw std::invalid_argument("narrative context is empty");
    } else {
        if (!narrative.empty()) throw std::invalid_argument("conversation context carries narrative text");
        if (turns.empty()) throw std::invalid_argument("conversation context has no turns");
        for (const auto& t : turns) {
            if (t.speaker.empty()) throw std::invalid_argument("conversation turn has empty speaker");
        }
    }
}

std::string render_context(const Context& context) {
    if (context.kind == ContextKind::Narrative) return context.narrative;
    std::ostringstream out;
    for (size_t i = 0; i < context.turns.size(); ++i) {
        if (i) out << '\n';
        out << context.turns[i].speaker << ": " << context.turns[i].utterance;
    }
    return out.str();
}

void Question::validate() const {
    if (text.empty()) throw std::invalid_argument("question text is empty");
    if (format == QuestionFormat::MultipleChoice) {
        if (options.size() < 2) throw std::invalid_argument("multiple-choice question needs at least two options");
    } else if (!options.empty()) {
        throw std::invalid_argument("free-form question carries options");
    }
}

void ToMExample::validate() const {
    if (id.empty()) throw std::invalid_argument("example id is empty");
    context.validate();
    question.validate();
    if (question.format == QuestionFormat::MultipleChoice) {
        if (gold.option_index < 0 || gold.option_index >= static_cast<int>(question.options.size()))
            throw std::invalid_argument("gold option index out of range");
    } else if (gold.reference_text.empty()) {
        throw std::invalid_argument("free-form example has no reference answer");
    }
    if (condition.has_value() && !pair_id.has_value())
        throw std::invalid_argument("condition set without pair id");
}

}  // namespace ccotom
