#include "ccotom/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "ccotom/errors.hpp"

namespace fs = std::filesystem;

namespace ccotom::prompting {

namespace {

const std::set<std::string>& allowed_names() {
    static const std::set<std::string> names = {
        "context",         "question",        "agent",           "constraints",
        "percept_response", "belief_response", "desire_response", "action_response",
        "fact_question",   "answer_format"};
    return names;
}

const std::set<std::string>& droppable_names() {
    static const std::set<std::string> names = {"constraints", "percept_response",
                                                "belief_response", "desire_response",
                                                "action_response"};
    return names;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (true) {
        size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

std::vector<std::string> line_placeholders(const std::string& line) {
    std::vector<std::string> names;
    size_t pos = 0;
    while ((pos = line.find('{', pos)) != std::string::npos) {
        size_t end = line.find('}', pos);
        if (end == std::string::npos)
            throw TemplateError("unterminated placeholder in line: " + line);
        names.push_back(line.substr(pos + 1, end - pos - 1));
        pos = end + 1;
    }
    return names;
}

std::string substitute_line(const std::string& line,
                            const std::map<std::string, std::string>& bindings) {
    std::string out;
    size_t pos = 0;
    while (pos < line.size()) {
        size_t open = line.find('{', pos);
        if (open == std::string::npos) {
            out.append(line, pos, std::string::npos);
            break;
        }
        out.append(line, pos, open - pos);
        size_t close = line.find('}', open);
        std::string name = line.substr(open + 1, close - open - 1);
        out += bindings.at(name);
        pos = close + 1;
    }
    return out;
}

}  // namespace

PromptTemplate PromptTemplate::parse(const std::string& source) {
    PromptTemplate t;
    t.source_ = source;
    for (const auto& line : split_lines(source)) {
        for (const auto& name : line_placeholders(line)) {
            if (!allowed_names().count(name))
                throw TemplateError("unknown placeholder {" + name + "}");
            t.placeholders_.insert(name);
            if (droppable_names().count(name))
                t.optional_.insert(name);
            else
                t.required_.insert(name);
        }
    }
    return t;
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& bindings) const {
    auto lines = split_lines(source_);
    std::vector<std::string> kept;
    bool skip_blank = false;
    for (const auto& line : lines) {
        if (skip_blank) {
            skip_blank = false;
            if (line.empty()) continue;
        }
        bool drop = false;
        for (const auto& name : line_placeholders(line)) {
            if (bindings.count(name)) continue;
            if (!droppable_names().count(name)) throw MissingPlaceholder(name);
            drop = true;
        }
        if (drop) {
            skip_blank = true;
            continue;
        }
        kept.push_back(substitute_line(line, bindings));
    }
    std::string out;
    for (size_t i = 0; i < kept.size(); ++i) {
        if (i) out += '\n';
        out += kept[i];
    }
    return out;
}

namespace {

const std::vector<std::pair<const char*, const char*>>& builtin_sources() {
    static const std::vector<std::pair<const char*, const char*>> sources = {
        {"bigtom_percept",
         "Story: {context}\n"
         "\n"
         "{constraints}\n"
         "\n"
         "Based on the above information, infer the percept of {agent}."},
        {"bigtom_belief_related",
         "Story: {context}\n"
         "\n"
         "{constraints}\n"
         "\n"
         "Percept of {agent}: {percept_response}\n"
         "\n"
         "Based on the above information, infer the belief of {agent}."},
        {"bigtom_desire",
         "Story: {context}\n"
         "\n"
         "{constraints}\n"
         "\n"
         "Based on the above information, infer the desire of {agent}."},
        {"bigtom_action_related",
         "Story: {context}\n"
         "\n"
         "{constraints}\n"
         "\n"
         "Desire of {agent}: {desire_response}\n"
         "\n"
         "Based on the above information, infer the action of {agent}."},
        {"bigtom_belief_final",
         "Story: {context}\n"
         "\n"
         "{constraints}\n"
         "\n"
         "Percept of {agent}: {percept_response}\n"
         "\n"
         "Question: {question}\n"
         "\n"
         "Based on the above information, infer the belief of {agent} and answer the question.\n"
         "{answer_format}"},
        {"bigtom_action_final",
         "Story: {context}\n"
         "\n"
         "{constraints}\n"
         "\n"
         "Belief of {agent}: {belief_response}\n"
         "\n"
         "Desire of {agent}: {desire_response}\n"
         "\n"
         "Question: {question}\n"
         "\n"
         "Based on the above information, infer the action of {agent} and answer the question.\n"
         "{answer_format}"},
        {"bigtom_belief_backward_final",
         "Story: {context}\n"
         "\n"
         "{constraints}\n"
         "\n"
         "Desire of {agent}: {desire_response}\n"
         "\n"
         "Action of {agent}: {action_response}\n"
         "\n"
         "Question: {question}\n"
         "\n"
         "Based on the above information, infer the belief of {agent} and answer the question.\n"
         "{answer_format}"},
        {"fantom_percept",
         "Conversation:\n"
         "{context}\n"
         "\n"
         "{constraints}\n"
         "\n"
         "Fact question: {fact_question}\n"
         "\n"
         "Based on the above information, infer the percept of {agent} about the fact question."},
        {"fantom_belief_final",
         "Conversation:\n"
         "{context}\n"
         "\n"
         "{constraints}\n"
         "\n"
         "Fact question: {fact_question}\n"
         "\n"
         "Percept of {agent} about the fact question: {percept_response}\n"
         "\n"
         "Question: {question}\n"
         "\n"
         "Based on the above information, answer the question about the belief of {agent}.\n"
         "{answer_format}"},
        {"onestep_fb",
         "First, infer the percept of {agent}. Next, answer the question based on the inferred "
         "percept of {agent}."},
        {"onestep_fa",
         "First, infer the percept of {agent}. Next, infer the belief of {agent} based on the "
         "inferred percept of {agent}. Next, infer the desire of {agent}. Next, answer the "
         "question based on the inferred belief of {agent} and the inferred desire of {agent}."},
        {"onestep_bb",
         "First, infer the desire of {agent}. Next, infer the action of {agent}. Next, answer "
         "the question based on the inferred action of {agent} and the inferred desire of "
         "{agent}."},
        {"onestep_fantom",
         "First, infer the fact question corresponding to the given question. Next, infer the "
         "percept of {agent} about the fact question. Next, answer the question based on the "
         "inferred percept of {agent} about the fact question."},
        {"cot",
         "Context:\n"
         "{context}\n"
         "\n"
         "Question: {question}\n"
         "\n"
         "Let's reason about the agent's mental state step by step.\n"
         "{answer_format}"},
    };
    return sources;
}

}  // namespace

TemplateLibrary TemplateLibrary::builtin() {
    TemplateLibrary lib;
    for (const auto& [id, source] : builtin_sources())
        lib.templates_.emplace(id, PromptTemplate::parse(source));
    return lib;
}

TemplateLibrary TemplateLibrary::load_directory(const std::string& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("template directory not found: " + dir);
    TemplateLibrary lib;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        try {
            lib.templates_.emplace(entry.path().stem().string(), PromptTemplate::parse(buf.str()));
        } catch (const TemplateError& e) {
            throw TemplateError(std::string(e.what()) + " [" + entry.path().string() + "]");
        }
    }
    if (lib.templates_.empty()) throw ConfigError("template directory holds no .txt files: " + dir);
    return lib;
}

void TemplateLibrary::export_directory(const std::string& dir) const {
    fs::create_directories(dir);
    for (const auto& [id, tmpl] : templates_) {
        std::ofstream out(fs::path(dir) / (id + ".txt"), std::ios::binary);
        if (!out) throw ConfigError("cannot write template file for " + id + " under " + dir);
        out << tmpl.source();
    }
}

const PromptTemplate& TemplateLibrary::get(const std::string& id) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) throw TemplateError("unknown template: " + id);
    return it->second;
}

bool TemplateLibrary::has(const std::string& id) const { return templates_.count(id) != 0; }

std::vector<std::string> TemplateLibrary::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : templates_) out.push_back(id);
    return out;
}

std::string option_label(int index) {
    if (index < 0 || index > 25) throw std::out_of_range("option index beyond letter labels");
    std::string label = "(x)";
    label[1] = static_cast<char>('a' + index);
    return label;
}

std::string render_question(const Question& question) {
    if (question.format == QuestionFormat::FreeForm) return question.text;
    std::ostringstream out;
    out << question.text;
    for (size_t i = 0; i < question.options.size(); ++i)
        out << '\n' << option_label(static_cast<int>(i)) << ' ' << question.options[i];
    return out.str();
}

std::string agent_identification_prompt(const Question& question, TaskType task) {
    std::ostringstream out;
    out << "Whose " << dimension_word(queried_dimension(task))
        << " is queried in the given question?\n"
        << question.text << '\n'
        << "Write only the name of the agent.";
    return out.str();
}

std::string fact_info_prompt(const std::string& rendered_context, const Question& question,
                             const std::string& agent) {
    std::ostringstream out;
    out << "Conversation:\n"
        << rendered_context << "\n\n"
        << "Question: " << question.text << "\n\n"
        << "What information about the belief of " << agent
        << " is queried in the given question?\n"
        << "Write only the information.";
    return out.str();
}

std::string fact_question_from_info_prompt(const std::string& info) {
    return "Generate a question asking about the following information: " + info +
           "\nWrite only the generated question.";
}

std::string answer_format_instruction(QuestionFormat format) {
    if (format == QuestionFormat::MultipleChoice)
        return "Write your final answer as 'Answer: (<option>) <answer>'. Always pick an option, "
               "do not say none of the above or that there is not enough information.";
    return "Write your final answer as 'Answer: <answer>'.";
}

namespace {

std::string lowercased(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string after_last_answer_marker(const std::string& response) {
    size_t pos = response.rfind("Answer:");
    if (pos == std::string::npos) return trim(response);
    return trim(response.substr(pos + 7));
}

}  // namespace

std::string parse_agent(const std::string& response) {
    std::string s = trim(response);
    if (s.rfind("Answer:", 0) == 0) s = trim(s.substr(7));
    size_t nl = s.find('\n');
    if (nl != std::string::npos) s = s.substr(0, nl);
    s = trim(s);
    while (!s.empty() && std::string(".,!?;:\"'").find(s.back()) != std::string::npos)
        s.pop_back();
    while (!s.empty() && (s.front() == '"' || s.front() == '\''))
        s.erase(0, 1);
    s = trim(s);
    if (s.empty()) throw EmptyAgentResponse();
    return s;
}

ParsedAnswer parse_final_answer(const std::string& response, const Question& question) {
    if (question.format == QuestionFormat::FreeForm) {
        ParsedAnswer out;
        out.format = QuestionFormat::FreeForm;
        out.text = after_last_answer_marker(response);
        return out;
    }

    const int n_options = static_cast<int>(question.options.size());
    static const std::regex pattern(R"(Answer:\s*\(\s*([A-Za-z0-9]+)\s*\))");
    std::smatch last;
    for (auto it = std::sregex_iterator(response.begin(), response.end(), pattern);
         it != std::sregex_iterator(); ++it)
        last = *it;
    if (!last.empty()) {
        const std::string token = last[1].str();
        int index = -1;
        if (std::all_of(token.begin(), token.end(),
                        [](unsigned char c) { return std::isdigit(c); })) {
            index = std::stoi(token) - 1;
        } else if (token.size() == 1 && std::isalpha(static_cast<unsigned char>(token[0]))) {
            index = std::tolower(static_cast<unsigned char>(token[0])) - 'a';
        }
        if (index >= 0 && index < n_options) {
            ParsedAnswer out;
            out.option_index = index;
            out.text = question.options[index];
            return out;
        }
    }

    const std::string span = lowercased(after_last_answer_marker(response));
    int matched = -1;
    int match_count = 0;
    for (int i = 0; i < n_options; ++i) {
        if (span.find(lowercased(question.options[i])) != std::string::npos) {
            matched = i;
            ++match_count;
        }
    }
    if (match_count == 1) {
        ParsedAnswer out;
        out.option_index = matched;
        out.text = question.options[matched];
        return out;
    }
    throw UnparseableChoice(response);
}

std::string parse_dimension_response(const std::string& response) {
    return after_last_answer_marker(response);
}

}  // namespace ccotom::prompting
