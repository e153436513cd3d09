#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ccotom {

/// The four mental-state dimensions the reasoning chains operate over.
enum class ToMDimension { Percept, Belief, Desire, Action };

/// The three supported reasoning task shapes. Forward tasks predict a
/// downstream dimension from upstream ones; BackwardBelief recovers a belief
/// from an action already present in the context.
enum class TaskType { ForwardBelief, ForwardAction, BackwardBelief };

enum class Condition { TrueBelief, FalseBelief };

enum class DatasetFamily { BigToM, Fantom };

const char* to_string(ToMDimension d);
const char* to_string(TaskType t);
const char* to_string(Condition c);
const char* to_string(DatasetFamily f);

/// Lowercased dimension word for use inside prompt sentences ("percept", ...).
std::string dimension_word(ToMDimension d);

std::optional<ToMDimension> parse_dimension(const std::string& s);
std::optional<TaskType> parse_task(const std::string& s);
std::optional<Condition> parse_condition(const std::string& s);

/// Fixed causal model over the four dimensions:
/// Percept -> Belief, Belief -> Action, Desire -> Action.
class CausalGraph {
public:
    static const CausalGraph& instance();

    const std::vector<std::pair<ToMDimension, ToMDimension>>& edges() const { return edges_; }
    std::vector<ToMDimension> parents(ToMDimension d) const;
    bool has_edge(ToMDimension from, ToMDimension to) const;

private:
    CausalGraph();
    std::vector<std::pair<ToMDimension, ToMDimension>> edges_;
};

/// Dimension the question asks about: Belief for ForwardBelief and
/// BackwardBelief, Action for ForwardAction.
ToMDimension queried_dimension(TaskType task);

/// Related dimensions inferred before the queried one, in prompting order.
std::vector<ToMDimension> related_dimensions(TaskType task);

/// Conditioning list for the final inference step of each task. ForwardBelief
/// conditions on Percept and ForwardAction on Belief+Desire (the queried
/// dimension's parents); BackwardBelief conditions on Action+Desire, using the
/// Belief -> Action edge in reverse. Kept as an explicit per-task list rather
/// than derived from the graph.
std::vector<ToMDimension> final_conditioning(TaskType task);

enum class ContextKind { Narrative, Conversation };

struct Turn {
    std::string speaker;
    std::string utterance;

    bool operator==(const Turn&) const = default;
};

/// A narrative story or an ordered conversation. Exactly one representation is
/// populated, matching kind.
struct Context {
    ContextKind kind = ContextKind::Narrative;
    std::string narrative;
    std::vector<Turn> turns;

    static Context make_narrative(std::string text);
    static Context make_conversation(std::vector<Turn> turns);

    /// Throws std::invalid_argument when the invariants are violated.
    void validate() const;

    bool operator==(const Context&) const = default;
};

/// Renders a context to prompt text. Narratives pass through unchanged;
/// conversations render one line per turn as "<speaker>: <utterance>".
std::string render_context(const Context& context);

enum class QuestionFormat { MultipleChoice, FreeForm };

struct Question {
    std::string text;
    QuestionFormat format = QuestionFormat::MultipleChoice;
    std::vector<std::string> options;  // MultipleChoice only, >= 2 entries
    std::optional<std::string> target_agent_hint;

    void validate() const;

    bool operator==(const Question&) const = default;
};

/// Gold answer. MultipleChoice uses option_index; FreeForm uses
/// reference_text plus optional wrong-answer texts for distance scoring.
struct Gold {
    int option_index = -1;
    std::string reference_text;
    std::vector<std::string> wrong_answers;

    bool operator==(const Gold&) const = default;
};

enum class ConversationScope { Short, Full };
enum class QType { Choice, Dist };

const char* to_string(ConversationScope s);
const char* to_string(QType q);
std::optional<ConversationScope> parse_scope(const std::string& s);
std::optional<QType> parse_qtype(const std::string& s);

/// One benchmark item: a context, a question over one ToM dimension, and the
/// gold answer plus task/condition metadata.
struct ToMExample {
    std::string id;
    Context context;
    Question question;
    TaskType task = TaskType::ForwardBelief;
    std::optional<Condition> condition;
    std::optional<std::string> pair_id;  // links the TB and FB variants of one item
    Gold gold;
    DatasetFamily family = DatasetFamily::BigToM;
    std::optional<ConversationScope> scope;  // conversation datasets only

    void validate() const;

    bool operator==(const ToMExample&) const = default;
};

}  // namespace ccotom
