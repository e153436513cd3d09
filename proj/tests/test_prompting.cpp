#include <doctest.h>

#include <ccotom/errors.hpp>
#include <ccotom/prompting.hpp>

#include "test_util.hpp"

#include <algorithm>
#include <map>
#include <string>

using namespace ccotom;
using namespace ccotom::prompting;
using testutil::TempDir;
using testutil::read_file;

TEST_CASE("template parsing collects placeholders") {
    auto t = PromptTemplate::parse("Story: {context}\n\nWho is {agent}?");
    CHECK(t.placeholders() == std::set<std::string>{"context", "agent"});
    CHECK(t.required_placeholders() == std::set<std::string>{"context", "agent"});
    CHECK(t.optional_placeholders().empty());
}

TEST_CASE("response and constraints placeholders are optional") {
    auto t = PromptTemplate::parse(
        "Story: {context}\n\n{constraints}\n\nBelief of {agent}: {belief_response}\n");
    CHECK(t.required_placeholders() == std::set<std::string>{"context", "agent"});
    CHECK(t.optional_placeholders() == std::set<std::string>{"constraints", "belief_response"});
}

TEST_CASE("template parsing rejects unknown and unterminated placeholders") {
    CHECK_THROWS_AS(PromptTemplate::parse("Hello {nonsense}"), TemplateError);
    CHECK_THROWS_AS(PromptTemplate::parse("Hello {agent"), TemplateError);
}

TEST_CASE("rendering substitutes bound placeholders") {
    auto t = PromptTemplate::parse("Story: {context}\n\nName: {agent}");
    auto text = t.render({{"context", "A tale."}, {"agent", "Iris"}});
    CHECK(text == "Story: A tale.\n\nName: Iris");
}

TEST_CASE("rendering throws on a missing required placeholder") {
    auto t = PromptTemplate::parse("Story: {context}");
    try {
        t.render({});
        FAIL("expected MissingPlaceholder");
    } catch (const MissingPlaceholder& e) {
        CHECK(e.name() == "context");
    }
}

TEST_CASE("unbound optional placeholders drop their line and the following blank") {
    auto t = PromptTemplate::parse(
        "Story: {context}\n"
        "\n"
        "{constraints}\n"
        "\n"
        "Infer the belief of {agent}.");
    auto with = t.render(
        {{"context", "S."}, {"agent", "Bo"}, {"constraints", "Rule one.\nRule two."}});
    CHECK(with == "Story: S.\n\nRule one.\nRule two.\n\nInfer the belief of Bo.");

    auto without = t.render({{"context", "S."}, {"agent", "Bo"}});
    CHECK(without == "Story: S.\n\nInfer the belief of Bo.");
}

TEST_CASE("an optional placeholder bound to text still renders inline") {
    auto t = PromptTemplate::parse("Belief of {agent}: {belief_response}\n\nDone.");
    CHECK(t.render({{"agent", "Em"}, {"belief_response", "it rains"}}) ==
          "Belief of Em: it rains\n\nDone.");
    CHECK(t.render({{"agent", "Em"}}) == "Done.");
}

TEST_CASE("builtin library exposes the full template set") {
    auto lib = TemplateLibrary::builtin();
    for (const char* id :
         {"bigtom_percept", "bigtom_belief_related", "bigtom_desire", "bigtom_belief_final",
          "bigtom_action_final", "bigtom_action_related", "bigtom_belief_backward_final",
          "fantom_percept", "fantom_belief_final", "onestep_fb", "onestep_fa", "onestep_bb",
          "onestep_fantom", "cot"}) {
        CAPTURE(id);
        CHECK(lib.has(id));
    }
    CHECK(lib.ids().size() == 14);
}

TEST_CASE("shipped template directory matches the builtin set byte for byte") {
    auto shipped = TemplateLibrary::load_directory(CCOTOM_TEMPLATE_DIR);
    auto builtin = TemplateLibrary::builtin();
    auto ids = builtin.ids();
    CHECK(shipped.ids() == ids);
    for (const auto& id : ids) {
        CAPTURE(id);
        REQUIRE(shipped.has(id));
        CHECK(shipped.get(id).source() == builtin.get(id).source());
    }
}

TEST_CASE("template export and reload round-trips sources exactly") {
    TempDir tmp("templates");
    auto lib = TemplateLibrary::builtin();
    lib.export_directory(tmp.path.string());
    auto loaded = TemplateLibrary::load_directory(tmp.path.string());
    CHECK(loaded.ids() == lib.ids());
    for (const auto& id : lib.ids()) {
        CHECK(loaded.get(id).source() == lib.get(id).source());
    }
}

TEST_CASE("questions render with lettered options") {
    Question q;
    q.text = "Where is the ball?";
    q.options = {"in the box", "on the shelf", "under the bed"};
    CHECK(render_question(q) ==
          "Where is the ball?\n(a) in the box\n(b) on the shelf\n(c) under the bed");

    Question ff;
    ff.text = "What does Ada believe?";
    ff.format = QuestionFormat::FreeForm;
    CHECK(render_question(ff) == "What does Ada believe?");
}

TEST_CASE("option labels run a, b, c") {
    CHECK(option_label(0) == "(a)");
    CHECK(option_label(1) == "(b)");
    CHECK(option_label(25) == "(z)");
}

TEST_CASE("agent identification prompt names the queried dimension") {
    Question q;
    q.text = "What will Omar do next?";
    q.options = {"x", "y"};
    CHECK(agent_identification_prompt(q, TaskType::ForwardAction) ==
          "Whose action is queried in the given question?\n"
          "What will Omar do next?\n"
          "Write only the name of the agent.");
    CHECK(agent_identification_prompt(q, TaskType::ForwardBelief) ==
          "Whose belief is queried in the given question?\n"
          "What will Omar do next?\n"
          "Write only the name of the agent.");
    CHECK(agent_identification_prompt(q, TaskType::BackwardBelief)
              .find("Whose belief is queried") == 0);
}

TEST_CASE("fact question reconstruction prompts carry the fixed instructions") {
    Question q;
    q.text = "What does Rae think about the key?";
    q.format = QuestionFormat::FreeForm;
    auto info = fact_info_prompt("Rae: hi\nTom: hello", q, "Rae");
    CHECK(info.find("What information about the belief of Rae is queried in the given question?") !=
          std::string::npos);
    CHECK(info.find("Rae: hi\nTom: hello") != std::string::npos);
    CHECK(info.find("What does Rae think about the key?") != std::string::npos);
    CHECK(info.find("Write only the information.") != std::string::npos);

    auto gen = fact_question_from_info_prompt("the location of the key");
    CHECK(gen ==
          "Generate a question asking about the following information: the location of the key\n"
          "Write only the generated question.");
}

TEST_CASE("multiple-choice answer instruction pins the output format") {
    CHECK(answer_format_instruction(QuestionFormat::MultipleChoice) ==
          "Write your final answer as 'Answer: (<option>) <answer>'. Always pick an option, do "
          "not say none of the above or that there is not enough information.");
    auto ff = answer_format_instruction(QuestionFormat::FreeForm);
    CHECK(ff.find("Answer:") != std::string::npos);
    CHECK(ff.find("(<option>)") == std::string::npos);
}

TEST_CASE("agent parsing trims to a bare name") {
    CHECK(parse_agent("Luka") == "Luka");
    CHECK(parse_agent("  Luka.  ") == "Luka");
    CHECK(parse_agent("Answer: Luka") == "Luka");
    CHECK(parse_agent("Luka\nBecause the question mentions him.") == "Luka");
    CHECK(parse_agent("\"Luka\"") == "Luka");
    CHECK_THROWS_AS(parse_agent("   \n  "), EmptyAgentResponse);
    CHECK_THROWS_AS(parse_agent(""), EmptyAgentResponse);
}

static Question two_options() {
    Question q;
    q.text = "Where?";
    q.options = {"in the drawer", "on the table"};
    return q;
}

TEST_CASE("final answers resolve option letters") {
    auto q = two_options();
    CHECK(parse_final_answer("Answer: (a) in the drawer", q).option_index == 0);
    CHECK(parse_final_answer("Answer: (b) on the table", q).option_index == 1);
    CHECK(parse_final_answer("Answer: (B) on the table", q).option_index == 1);
    CHECK(parse_final_answer("Answer: ( a ) in the drawer", q).option_index == 0);
}

TEST_CASE("final answers resolve option digits") {
    auto q = two_options();
    CHECK(parse_final_answer("Answer: (1) in the drawer", q).option_index == 0);
    CHECK(parse_final_answer("Answer: (2) on the table", q).option_index == 1);
}

TEST_CASE("the last answer marker wins") {
    auto q = two_options();
    auto parsed = parse_final_answer(
        "Answer: (a) in the drawer\nWait, reconsidering.\nAnswer: (b) on the table", q);
    CHECK(parsed.option_index == 1);
}

TEST_CASE("a unique option-text match rescues label-free responses") {
    auto q = two_options();
    auto parsed = parse_final_answer("Answer: on the table", q);
    CHECK(parsed.option_index == 1);
    CHECK(parse_final_answer("Answer: ON THE TABLE", q).option_index == 1);
}

TEST_CASE("unresolvable choice responses throw and never go out of range") {
    auto q = two_options();
    CHECK_THROWS_AS(parse_final_answer("I cannot decide.", q), UnparseableChoice);
    CHECK_THROWS_AS(parse_final_answer("Answer: (z) something else", q), UnparseableChoice);
    CHECK_THROWS_AS(parse_final_answer("Answer: (9) out of range", q), UnparseableChoice);

    Question overlap;
    overlap.text = "Where?";
    overlap.options = {"the drawer", "the drawer by the door"};
    // Both options occur in the response, so the text fallback is ambiguous.
    CHECK_THROWS_AS(parse_final_answer("Answer: the drawer by the door", overlap),
                    UnparseableChoice);
}

TEST_CASE("free-form answers take the text after the last marker") {
    Question q;
    q.text = "What does Pete believe?";
    q.format = QuestionFormat::FreeForm;
    auto parsed = parse_final_answer("Reasoning first.\nAnswer: Pete thinks it moved.", q);
    CHECK(parsed.format == QuestionFormat::FreeForm);
    CHECK(parsed.text == "Pete thinks it moved.");
    CHECK(parse_final_answer("Pete thinks it moved.", q).text == "Pete thinks it moved.");
}

TEST_CASE("dimension responses strip the answer marker when present") {
    CHECK(parse_dimension_response("Answer: Bo sees the change.") == "Bo sees the change.");
    CHECK(parse_dimension_response("Bo sees the change.") == "Bo sees the change.");
    CHECK(parse_dimension_response("Step one.\nAnswer: final claim") == "final claim");
    CHECK(parse_dimension_response("   ").empty());
}
