#include "boad/evaluation.hpp"

#include <algorithm>
#include <regex>
#include <sstream>

#include "boad/error.hpp"
#include "boad/parallel.hpp"

namespace boad {

OrchestratorPlan generic_plan(std::vector<ArmId> subset) {
    std::string text =
        "1. Read the problem description and explore the repository to find the code involved.\n"
        "2. Whenever one of the available subagents fits the current phase of work, call it and pass it all "
        "the context it needs.\n"
        "3. Implement the fix and check it against the behavior described in the problem.\n"
        "4. " + std::string(kCleanupStep) + "\n"
        "5. " + std::string(kSubmitStep);
    return {std::move(text), std::move(subset), false};
}

std::string subagents_overview(std::span<const SubAgentSpec> subset) {
    std::string out;
    for (std::size_t i = 0; i < subset.size(); ++i) {
        if (i) out += '\n';
        out += "- name: " + subset[i].name + " — " + subset[i].docstring;
    }
    return out;
}

namespace {

std::string trim_copy(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

}  // namespace

std::string parse_plan(std::string_view text, std::span<const std::string> required_names) {
    static const std::regex step_re(R"(^(\d+)\.\s+(.*\S)\s*$)");
    std::vector<std::string> bodies;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        const auto t = trim_copy(line);
        if (t.empty()) continue;
        std::smatch m;
        if (!std::regex_match(t, m, step_re))
            throw ParseError("plan line does not start with a step number: '" + t + "'");
        if (std::stoul(m[1].str()) != bodies.size() + 1)
            throw ParseError("plan steps are not numbered consecutively at '" + t + "'");
        bodies.push_back(m[2].str());
    }
    if (bodies.size() < 3 || bodies.size() > 7)
        throw ParseError("plan has " + std::to_string(bodies.size()) + " steps; expected 3 to 7");
    if (bodies[bodies.size() - 2] != kCleanupStep) throw ParseError("plan lacks the cleanup step before submit");
    if (bodies.back() != kSubmitStep) throw ParseError("plan does not end with the submit step");
    for (const auto& name : required_names) {
        const auto phrase = "Use the " + name + " subagent to";
        const bool found = std::any_of(bodies.begin(), bodies.end(),
                                       [&](const std::string& b) { return b.find(phrase) != std::string::npos; });
        if (!found) throw ParseError("plan never uses subagent " + name);
    }
    std::string out;
    for (std::size_t i = 0; i < bodies.size(); ++i) {
        if (i) out += '\n';
        out += std::to_string(i + 1) + ". " + bodies[i];
    }
    return out;
}

const OrchestratorPlan* PlanCache::find(const Key& key) const {
    auto it = cache_.find(key);
    if (it == cache_.end()) return nullptr;
    ++hits_;
    return &it->second;
}

void PlanCache::put(Key key, OrchestratorPlan plan) { cache_.insert_or_assign(std::move(key), std::move(plan)); }

OrchestratorPlan build_orchestrator_plan(std::span<const SubAgentSpec> subset, bool customized,
                                         llm::Gateway* planner, PlanCache* cache) {
    if (subset.empty()) throw ContractError("build_orchestrator_plan: empty subset");
    std::vector<ArmId> ids;
    std::vector<std::string> names;
    for (const auto& s : subset) {
        ids.push_back(s.arm_id);
        names.push_back(s.name);
    }
    if (!customized) return generic_plan(std::move(ids));
    if (!planner) throw ContractError("build_orchestrator_plan: customized plan needs a planner");

    PlanCache::Key key{ids, customized, std::string(kPlannerVersion)};
    if (cache) {
        if (const auto* hit = cache->find(key)) return *hit;
    }

    llm::ChatExchange ex;
    ex.template_id = std::string(kPlannerVersion);
    ex.messages.push_back(
        {llm::Role::user, llm::render_template(kPlannerVersion, {{"subagents_overview", subagents_overview(subset)}})});
    auto reply = planner->complete(ex);
    std::string text;
    try {
        text = parse_plan(reply, names);
    } catch (const ParseError& first) {
        ex.messages.push_back({llm::Role::assistant, reply});
        ex.messages.push_back({llm::Role::user,
                               std::string("That plan is invalid (") + first.what() +
                                   "). Output only 3 to 7 numbered steps as plain text, using \"Use the <name> "
                                   "subagent to\" for every subagent, and end with the cleanup and submit steps."});
        reply = planner->complete(ex);
        try {
            text = parse_plan(reply, names);
        } catch (const ParseError& e) {
            throw ParseError(std::string("planner output invalid after retry: ") + e.what());
        }
    }
    OrchestratorPlan plan{std::move(text), std::move(ids), true};
    if (cache) cache->put(std::move(key), plan);
    return plan;
}

RoundRecord run_round(std::uint64_t t, std::span<const SubAgentSpec> subset, const OrchestratorPlan& plan,
                      std::span<const TaskInstance> instances, EvaluationBackend& backend,
                      const RoundOptions& options) {
    if (instances.empty()) throw ContractError("run_round: no instances");
    if (subset.empty()) throw ContractError("run_round: empty subset");

    RoundRecord record;
    record.round = t;
    for (const auto& s : subset) record.subset.push_back(s.arm_id);
    record.plan = plan;
    record.trajectories.resize(instances.size());

    parallel_for(instances.size(), options.parallelism, [&](std::size_t i) {
        const auto& inst = instances[i];
        std::string last_error;
        for (std::uint32_t attempt = 0; attempt <= options.transport_retries; ++attempt) {
            try {
                auto traj = backend.run(plan, subset, inst, EvalContext{t, i, "trajectory"});
                traj.subset = record.subset;
                traj.validate(inst.max_steps);
                record.trajectories[i] = std::move(traj);
                return;
            } catch (const TransportError& e) {
                last_error = e.what();
            } catch (const std::exception& e) {
                last_error = e.what();
                break;
            }
        }
        Trajectory failed;
        failed.instance_id = inst.instance_id;
        failed.subset = record.subset;
        failed.error = last_error;
        record.trajectories[i] = std::move(failed);
    });
    return record;
}

// ---- scaffold adapter -------------------------------------------------------

std::string subagent_tool_docs(std::span<const SubAgentSpec> subset, std::size_t first_number) {
    std::ostringstream os;
    for (std::size_t i = 0; i < subset.size(); ++i) {
        const auto& s = subset[i];
        const auto num = first_number + i;
        os << "---- BEGIN FUNCTION #" << num << ": " << s.name << " ----\n"
           << "Description: " << s.docstring << "\n"
           << "Parameters:\n"
           << "  (1) context (string, required): " << s.context_description << "\n"
           << "---- END FUNCTION #" << num << " ----\n";
        if (i + 1 < subset.size()) os << "\n";
    }
    return os.str();
}

std::optional<FunctionCall> parse_function_call(std::string_view text) {
    const auto open = text.find("<function=");
    if (open == std::string_view::npos) return std::nullopt;
    const auto name_end = text.find('>', open);
    if (name_end == std::string_view::npos) return std::nullopt;
    FunctionCall call;
    call.name = trim_copy(text.substr(open + 10, name_end - open - 10));
    auto close = text.find("</function>", name_end);
    const auto body = text.substr(name_end + 1, close == std::string_view::npos ? std::string_view::npos
                                                                                 : close - name_end - 1);
    std::size_t pos = 0;
    while (true) {
        const auto p = body.find("<parameter=", pos);
        if (p == std::string_view::npos) break;
        const auto pn_end = body.find('>', p);
        const auto pend = body.find("</parameter>", pn_end);
        if (pn_end == std::string_view::npos || pend == std::string_view::npos) break;
        auto value = body.substr(pn_end + 1, pend - pn_end - 1);
        if (value.starts_with('\n')) value.remove_prefix(1);
        if (value.ends_with('\n')) value.remove_suffix(1);
        call.parameters[trim_copy(body.substr(p + 11, pn_end - p - 11))] = std::string(value);
        pos = pend + 12;
    }
    return call;
}

ScaffoldBackend::ScaffoldBackend(llm::Gateway& gateway, std::uint32_t subagent_step_limit, Verifier verifier)
    : gateway_(gateway), subagent_step_limit_(subagent_step_limit), verifier_(std::move(verifier)) {}

namespace {

constexpr std::string_view kSubmitDocs =
    "---- BEGIN FUNCTION #1: submit ----\n"
    "Description: Submit the current changes to the repository and finish.\n"
    "No parameters are required for this function.\n"
    "---- END FUNCTION #1 ----\n";

constexpr std::string_view kSubmitSubagentDocs =
    "---- BEGIN FUNCTION #1: submit_subagent ----\n"
    "Description: Finish your task and return your findings or changes to the main agent.\n"
    "Parameters:\n"
    "  (1) result (string, required): a clear and complete summary of your findings or changes.\n"
    "---- END FUNCTION #1 ----\n";

}  // namespace

std::string ScaffoldBackend::orchestrator_prompt(const OrchestratorPlan& plan, std::span<const SubAgentSpec> subset,
                                                 const TaskInstance& instance) const {
    std::ostringstream os;
    os << "You are a helpful assistant that can interact with a computer to solve tasks.\n\n"
       << "You have access to the following functions:\n\n"
       << kSubmitDocs << "\n"
       << subagent_tool_docs(subset, 2) << "\n"
       << "If you choose to call a function, you must ONLY reply in the following format with NO suffix:\n"
       << "<function=example_function_name>\n<parameter=example_parameter_1>value_1</parameter>\n</function>\n\n"
       << "Follow this plan:\n"
       << plan.plan_text << "\n\n"
       << "<pr_description>\n"
       << instance.problem_statement << "\n</pr_description>";
    return os.str();
}

Trajectory ScaffoldBackend::run(const OrchestratorPlan& plan, std::span<const SubAgentSpec> subset,
                                const TaskInstance& instance, const EvalContext&) {
    Trajectory traj;
    traj.instance_id = instance.instance_id;
    for (const auto& s : subset) traj.subset.push_back(s.arm_id);
    const std::size_t horizon = instance.max_steps;

    llm::ChatExchange orch;
    orch.template_id = "scaffold_orchestrator";
    orch.messages.push_back({llm::Role::system, orchestrator_prompt(plan, subset, instance)});
    orch.messages.push_back({llm::Role::user, instance.problem_statement});

    while (traj.steps.size() + 1 < horizon) {
        const auto reply = gateway_.complete(orch);
        const auto call = parse_function_call(reply);
        std::string observation;
        if (!call) {
            observation = "No function call found. Reply with exactly one function call.";
            traj.steps.push_back({std::string(kOrchestratorActor), reply, observation});
        } else if (call->name == "submit") {
            traj.steps.push_back({std::string(kOrchestratorActor), reply, "Changes submitted."});
            traj.submitted = true;
            break;
        } else if (auto it = std::find_if(subset.begin(), subset.end(),
                                          [&](const SubAgentSpec& s) { return s.name == call->name; });
                   it != subset.end()) {
            const auto call_index = traj.steps.size();
            traj.steps.push_back({std::string(kOrchestratorActor), reply, ""});
            const auto ctx = call->parameters.contains("context") ? call->parameters.at("context") : "";

            llm::ChatExchange sub;
            sub.template_id = "scaffold_subagent";
            sub.messages.push_back(
                {llm::Role::system,
                 llm::render_text(it->system_template, {"command_docs", "problem_statement"},
                                  {{"command_docs", std::string(kSubmitSubagentDocs)},
                                   {"problem_statement", instance.problem_statement}})});
            sub.messages.push_back({llm::Role::user, it->render_instance(ctx)});

            const auto seg_start = traj.steps.size();
            observation = "Subagent " + it->name + " stopped without submitting a result.";
            for (std::uint32_t k = 0; k < subagent_step_limit_ && traj.steps.size() + 1 < horizon; ++k) {
                const auto sreply = gateway_.complete(sub);
                const auto scall = parse_function_call(sreply);
                if (scall && scall->name == "submit_subagent") {
                    const auto r = scall->parameters.find("result");
                    observation = r == scall->parameters.end() ? std::string{} : r->second;
                    traj.steps.push_back({it->arm_id, sreply, "Result returned to the main agent."});
                    break;
                }
                const std::string sobs = scall ? "Tool '" + scall->name + "' is not available in this environment."
                                               : "No function call found. Call submit_subagent when finished.";
                traj.steps.push_back({it->arm_id, sreply, sobs});
                sub.messages.push_back({llm::Role::assistant, sreply});
                sub.messages.push_back({llm::Role::user, sobs});
            }
            if (traj.steps.size() > seg_start)
                traj.segments.push_back({it->arm_id, seg_start, traj.steps.size() - seg_start});
            traj.steps[call_index].observation = observation;
        } else {
            observation = "Tool '" + call->name + "' is not available in this environment.";
            traj.steps.push_back({std::string(kOrchestratorActor), reply, observation});
        }
        orch.messages.push_back({llm::Role::assistant, reply});
        orch.messages.push_back({llm::Role::user, observation});
    }
    if (!traj.submitted) {
        traj.steps.push_back({std::string(kOrchestratorActor), "submit", "Submission forced at the step horizon."});
        traj.submitted = true;
    }
    traj.success = verifier_ ? verifier_(traj, instance) : false;
    return traj;
}

}  // namespace boad
