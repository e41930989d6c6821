#include <doctest.h>

#include "boad/agent_factory.hpp"
#include "boad/error.hpp"
#include "boad/simenv.hpp"
#include "helpers.hpp"

using namespace boad;

namespace {

const std::string kPatchEditor = R"(It may be useful to have a patch editor subagent. This would go well with previous subagents and help the main agent more efficiently patch the issue.
```yaml
patch_editor:
  signature: "patch_editor <context>"
  docstring: "[subagent] Fixes a specific part of code that has errors. Outputs the changes made with reasoning. After calling, the correct changes are already implemented in the repository."
  arguments:
    - name: context
      type: string
      description: "A string containing the specific file path to make edits in, the lines where edits need to be made, a comprehensive description of the issue with the code (do not assume the subagent has any information about the repository or problem statement), and what to edit."
      required: true
  subagent: true
```)";

const std::string kTemplates = R"(Compact templates.
```yaml
system_template: |
  You are a helpful assistant that edits code.
  {{command_docs}}
instance_template: |-
  Your task:
  {{context}}
```)";

std::string replace(std::string s, const std::string& from, const std::string& to) {
    s.replace(s.find(from), from.size(), to);
    return s;
}

llm::GatewayOptions fast() {
    llm::GatewayOptions o;
    o.backoff = std::chrono::milliseconds(0);
    return o;
}

// Returns a finished trajectory in which the arm is called (or not).
class StubBackend final : public EvaluationBackend {
public:
    explicit StubBackend(bool call) : call_(call) {}
    Trajectory run(const OrchestratorPlan&, std::span<const SubAgentSpec> subset, const TaskInstance& inst,
                   const EvalContext&) override {
        ++runs;
        Trajectory t;
        t.instance_id = inst.instance_id;
        t.steps.push_back({"orchestrator", "read", "ok"});
        if (call_) {
            t.steps.push_back({subset[0].arm_id, "work", "done"});
            t.segments.push_back({subset[0].arm_id, 1, 1});
        }
        t.steps.push_back({"orchestrator", "submit", "submitted"});
        t.submitted = true;
        return t;
    }
    int runs = 0;

private:
    bool call_;
};

std::vector<TaskInstance> design() {
    return {{"d1", "Fix A", "", 60}, {"d2", "Fix B", "", 60}, {"d3", "Fix C", "", 60}};
}

}  // namespace

TEST_CASE("the patch_editor sample document parses") {
    const auto doc = parse_tool_document(kPatchEditor);
    CHECK(doc.name == "patch_editor");
    CHECK(doc.signature == "patch_editor <context>");
    CHECK(doc.docstring.starts_with("[subagent] Fixes a specific part of code"));
    CHECK(doc.context_description.starts_with("A string containing the specific file path"));
}

TEST_CASE("malformed tool documents are rejected") {
    CHECK_THROWS_AS(parse_tool_document(kPatchEditor + "\n" + kPatchEditor), ParseError);
    CHECK_THROWS_AS(parse_tool_document(replace(kPatchEditor, "\"[subagent] Fixes", "\"Fixes")), ContractError);
    CHECK_THROWS_AS(parse_tool_document("patch_editor is a nice idea"), ParseError);
    CHECK_THROWS_AS(parse_tool_document(replace(kPatchEditor, "- name: context", "- name: path")), ParseError);
    CHECK_THROWS_AS(parse_tool_document(replace(kPatchEditor, "type: string", "type: int")), ParseError);
    CHECK_THROWS_AS(parse_tool_document(replace(kPatchEditor, "required: true", "required: false")), ParseError);
    CHECK_THROWS_AS(parse_tool_document(replace(kPatchEditor, "  subagent: true\n", "")), ParseError);
    CHECK_THROWS_AS(parse_tool_document(replace(kPatchEditor, "```yaml\npatch_editor:", "```yaml\nother: 1\npatch_editor:")),
                    ParseError);
    const auto two_args = replace(kPatchEditor, "      required: true\n",
                                  "      required: true\n    - name: extra\n      type: string\n      required: true\n");
    CHECK_THROWS_AS(parse_tool_document(two_args), ParseError);
}

TEST_CASE("template document parsing") {
    const auto t = parse_subagent_templates(kTemplates);
    CHECK(t.instance_template == "Your task:\n{{context}}");
    CHECK(t.system_template.starts_with("You are a helpful assistant"));
    CHECK_THROWS_AS(parse_subagent_templates(replace(kTemplates, "{{context}}", "the task")), ContractError);
    CHECK_THROWS_AS(parse_subagent_templates("no block"), ParseError);
}

TEST_CASE("update parsing") {
    CHECK(parse_updates("Looks fine.\n```yaml\nupdates: {}\n```").empty());
    CHECK(parse_updates("```yaml\nupdates:\n```").empty());
    const auto u = parse_updates("Better discovery.\n```yaml\nupdates:\n  docstring: \"[subagent] New text.\"\n```");
    CHECK(u.keys() == std::vector<std::string>{"docstring"});
    CHECK(*u.docstring == "[subagent] New text.");
    CHECK_THROWS_AS(parse_updates("```yaml\nupdates:\n  name: x\n```"), ParseError);
    CHECK_THROWS_AS(parse_updates("```yaml\nchanges: {}\n```"), ParseError);
    CHECK_THROWS_AS(parse_updates("```yaml\nupdates: {}\n```\n```yaml\nupdates: {}\n```"), ParseError);
}

TEST_CASE("apply_updates changes only the given keys") {
    const auto s = testing::spec("a");
    SpecUpdates u;
    u.docstring = "[subagent] Rewritten.";
    const auto out = apply_updates(s, u);
    CHECK(out.docstring == "[subagent] Rewritten.");
    CHECK(out.context_description == s.context_description);
    CHECK(out.instance_template == s.instance_template);
    CHECK(apply_updates(s, {}) == s);
}

TEST_CASE("unique names") {
    CHECK(unique_name("patch_editor", {}) == "patch_editor");
    CHECK(unique_name("patch_editor", {"patch_editor"}) == "patch_editor_2");
    CHECK(unique_name("patch_editor", {"patch_editor", "patch_editor_2"}) == "patch_editor_3");
}

TEST_CASE("generation prompt lists previous subagents and feedback") {
    Archive a;
    a.add_arm(testing::spec("issue_analyzer"));
    const auto req = make_generation_request(a, 4, "Previous designs overlapped.");
    const auto text = previous_subagents_text(req);
    CHECK(text == "PREVIOUS SUBAGENTS\n- issue_analyzer: [subagent] Does the issue_analyzer step.\n\nFEEDBACK\n"
                  "Previous designs overlapped.\n");
    CHECK(previous_subagents_text(make_generation_request(Archive{}, 1)) == "PREVIOUS SUBAGENTS\n(none)\n");
    const auto prompt = render_generation_prompt(req);
    CHECK(prompt.find(text) != std::string::npos);
    CHECK(prompt.find("{{PREVIOUS_ITERATION_FEEBACK}}") == std::string::npos);
}

TEST_CASE("generate_subagent from the patch_editor sample, with name collision") {
    auto mock = std::make_shared<llm::MockChatProvider>();
    mock->queue("subagent_gen_v1", {kPatchEditor});
    mock->queue("subagent_templates_v1", {kTemplates});
    llm::Gateway g(mock, fast());
    Archive a;
    a.add_arm(testing::spec("patch_editor"));
    const auto s = generate_subagent(make_generation_request(a, 6), g);
    CHECK(s.name == "patch_editor_2");
    CHECK(s.arm_id == "patch_editor_2");
    CHECK(s.created_round == 6);
    CHECK(s.origin == Origin::crp_generated);
    CHECK(s.instance_template == "Your task:\n{{context}}");
    CHECK(s.docstring.starts_with("[subagent]"));
}

TEST_CASE("generate_subagent retries once with the parse error") {
    auto mock = std::make_shared<llm::MockChatProvider>();
    std::vector<llm::ChatExchange> seen;
    mock->on_template("subagent_gen_v1", [&](const llm::ChatExchange& ex) {
        seen.push_back(ex);
        return seen.size() == 1 ? std::string("I would build a patch editor.") : kPatchEditor;
    });
    mock->queue("subagent_templates_v1", {kTemplates});
    llm::Gateway g(mock, fast());
    const auto s = generate_subagent(make_generation_request(Archive{}, 1), g);
    CHECK(s.name == "patch_editor");
    REQUIRE(seen.size() == 2);
    CHECK(seen[1].messages.size() == 3);
    CHECK(seen[1].messages[1].content == "I would build a patch editor.");
    CHECK(seen[1].messages[2].content.starts_with("Your previous output was rejected"));

    auto bad = std::make_shared<llm::MockChatProvider>();
    bad->queue("subagent_gen_v1", {"no", "still no"});
    llm::Gateway g2(bad, fast());
    CHECK_THROWS_AS(generate_subagent(make_generation_request(Archive{}, 1), g2), ParseError);
}

TEST_CASE("warm-up with empty updates is a fixed point") {
    auto mock = std::make_shared<llm::MockChatProvider>();
    mock->on_template("warmup_refine_v1", [](const llm::ChatExchange&) { return std::string("Fine.\n```yaml\nupdates: {}\n```"); });
    llm::Gateway g(mock, fast());
    StubBackend backend(true);
    const auto s = testing::spec("a");
    const auto state = warmup_refine(s, design(), 4, backend, g);
    CHECK(state.spec == s);
    CHECK(state.rounds_done == 4);
    CHECK(state.history.size() == 4);
    CHECK(mock->calls() == 4);
    CHECK(backend.runs == 4);
}

TEST_CASE("warm-up applies only the keys it is given") {
    auto mock = std::make_shared<llm::MockChatProvider>();
    mock->queue("warmup_refine_v1", {"```yaml\nupdates:\n  docstring: \"[subagent] Clearer.\"\n```"});
    llm::Gateway g(mock, fast());
    StubBackend backend(true);
    const auto s = testing::spec("a");
    const auto state = warmup_refine(s, design(), 1, backend, g);
    CHECK(state.spec.docstring == "[subagent] Clearer.");
    CHECK(state.spec.context_description == s.context_description);
    CHECK(state.spec.instance_template == s.instance_template);
}

TEST_CASE("instance_template edits are dropped when the arm was not called") {
    const std::string reply =
        "```yaml\nupdates:\n  instance_template: \"New task:\\n{{context}}\"\n  context_description: \"Everything.\"\n```";
    auto mock = std::make_shared<llm::MockChatProvider>();
    mock->on_template("warmup_refine_v1", [&](const llm::ChatExchange&) { return reply; });
    llm::Gateway g(mock, fast());
    const auto s = testing::spec("a");

    StubBackend uncalled(false);
    const auto state = warmup_refine(s, design(), 1, uncalled, g);
    CHECK(state.spec.instance_template == s.instance_template);
    CHECK(state.spec.context_description == "Everything.");
    CHECK(state.history[0].dropped == std::vector<std::string>{"instance_template"});

    StubBackend called(true);
    CHECK(warmup_refine(s, design(), 1, called, g).spec.instance_template == "New task:\n{{context}}");
}

TEST_CASE("invalid warm-up updates are skipped") {
    auto mock = std::make_shared<llm::MockChatProvider>();
    mock->queue("warmup_refine_v1", {"```yaml\nupdates:\n  docstring: \"lost the prefix\"\n```", "garbage",
                                     "```yaml\nupdates:\n  instance_template: \"no placeholder\"\n```"});
    llm::Gateway g(mock, fast());
    StubBackend backend(true);
    const auto s = testing::spec("a");
    const auto state = warmup_refine(s, design(), 3, backend, g);
    CHECK(state.spec == s);
    CHECK(state.rounds_done == 3);
    for (const auto& e : state.history) CHECK(e.skipped.has_value());
    CHECK(mock->calls() == 3);  // at most one refiner call per round
}

TEST_CASE("warm-up is deterministic in its instance picks") {
    auto mock = std::make_shared<llm::MockChatProvider>();
    mock->on_template("warmup_refine_v1", [](const llm::ChatExchange&) { return std::string("```yaml\nupdates: {}\n```"); });
    llm::Gateway g(mock, fast());
    StubBackend backend(true);
    WarmupOptions o{3, 7};
    const auto a = warmup_refine(testing::spec("a"), design(), 4, backend, g, o);
    const auto b = warmup_refine(testing::spec("a"), design(), 4, backend, g, o);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a.history[i].instance_id == b.history[i].instance_id);
}
