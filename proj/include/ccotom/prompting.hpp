#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "ccotom/core.hpp"

namespace ccotom::prompting {

/// Text template with {name} placeholders. Placeholder names are restricted
/// to a fixed vocabulary; unknown names fail at parse time. The response and
/// constraints placeholders are droppable: when unbound at render time, the
/// line holding them disappears together with one following blank line, so a
/// template renders cleanly with or without those blocks.
class PromptTemplate {
public:
    static PromptTemplate parse(const std::string& source);

    std::string render(const std::map<std::string, std::string>& bindings) const;

    const std::string& source() const { return source_; }
    const std::set<std::string>& placeholders() const { return placeholders_; }
    const std::set<std::string>& required_placeholders() const { return required_; }
    const std::set<std::string>& optional_placeholders() const { return optional_; }

private:
    std::string source_;
    std::set<std::string> placeholders_;
    std::set<std::string> required_;
    std::set<std::string> optional_;
};

/// Named collection of prompt templates. The built-in set drives the chains;
/// a directory of <id>.txt files can replace it wholesale.
class TemplateLibrary {
public:
    static TemplateLibrary builtin();
    static TemplateLibrary load_directory(const std::string& dir);

    void export_directory(const std::string& dir) const;

    const PromptTemplate& get(const std::string& id) const;
    bool has(const std::string& id) const;
    std::vector<std::string> ids() const;

private:
    std::map<std::string, PromptTemplate> templates_;
};

/// Question text plus lettered option lines for multiple choice.
std::string render_question(const Question& question);

/// Label for option i: "(a)", "(b)", ...
std::string option_label(int index);

/// Prompt asking which agent's mental state the question queries. Only belief
/// and action questions are supported, matching queried_dimension.
std::string agent_identification_prompt(const Question& question, TaskType task);

/// First reconstruction prompt: extract the queried information from a belief
/// question over a conversation.
std::string fact_info_prompt(const std::string& rendered_context, const Question& question,
                             const std::string& agent);

/// Second reconstruction prompt: turn the extracted information into a
/// standalone fact question.
std::string fact_question_from_info_prompt(const std::string& info);

/// Closing instruction appended to final-answer prompts.
std::string answer_format_instruction(QuestionFormat format);

struct ParsedAnswer {
    QuestionFormat format = QuestionFormat::MultipleChoice;
    int option_index = -1;  // MultipleChoice only
    std::string text;

    bool operator==(const ParsedAnswer&) const = default;
};

/// Extracts the agent name from an identification response. Throws
/// EmptyAgentResponse when nothing usable remains.
std::string parse_agent(const std::string& response);

/// Extracts the final answer. Multiple choice resolves "Answer: (x)" labels
/// to an option index, falling back to a unique option-text match; throws
/// UnparseableChoice when neither works. Free form returns the text after the
/// last "Answer:" marker, or the whole trimmed response.
ParsedAnswer parse_final_answer(const std::string& response, const Question& question);

/// Extracts an intermediate inference: text after the last "Answer:" marker
/// if present, otherwise the whole trimmed response. May return empty.
std::string parse_dimension_response(const std::string& response);

}  // namespace ccotom::prompting
