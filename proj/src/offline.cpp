// Deterministic stand-ins for every prompt the optimizer sends, so that a
// whole run can execute without a model endpoint. Each responder is a pure
// function of the exchange it receives.
#include <algorithm>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "boad/error.hpp"
#include "boad/rng.hpp"
#include "boad/runner.hpp"

namespace boad {

namespace {

constexpr std::string_view kWarmupNote = "Include the issue summary and any findings gathered so far.";

std::string first_message(const llm::ChatExchange& ex) {
    if (ex.messages.empty()) throw ContractError("offline responder: empty exchange");
    return ex.messages.front().content;
}

std::string line_after(std::string_view text, std::string_view marker, std::size_t from = 0) {
    const auto p = text.find(marker, from);
    if (p == std::string_view::npos) return {};
    const auto start = p + marker.size();
    const auto end = text.find('\n', start);
    return std::string(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string fenced_yaml(const YAML::Emitter& e) { return "```yaml\n" + std::string(e.c_str()) + "\n```"; }

std::string generator_reply(const llm::ChatExchange& ex, const std::vector<ArmId>& pool, const sim::WorldModel& world) {
    const auto prompt = first_message(ex);
    std::set<std::string> listed;
    const auto section = prompt.rfind("PREVIOUS SUBAGENTS\n");
    if (section != std::string::npos) {
        std::istringstream in(prompt.substr(section));
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line) && !line.empty()) {
            if (!line.starts_with("- ")) continue;
            const auto colon = line.find(": ");
            listed.insert(line.substr(2, colon == std::string::npos ? std::string::npos : colon - 2));
        }
    }
    const auto it = std::find_if(pool.begin(), pool.end(), [&](const ArmId& a) { return !listed.contains(a); });
    if (it == pool.end()) return "Every design I can think of overlaps with the previous subagents.";

    std::vector<std::string> roles;
    for (const auto& [role, p] : world.skills(*it)) roles.push_back(role);
    const std::string focus = roles.empty() ? "general upkeep" : join(roles, " and ");
    YAML::Emitter e;
    e << YAML::BeginMap << YAML::Key << *it << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "signature" << YAML::Value << YAML::DoubleQuoted << (*it + " <context>");
    e << YAML::Key << "docstring" << YAML::Value << YAML::DoubleQuoted
      << ("[subagent] Handles the " + focus +
          " part of resolving an issue and returns a short report of what it found or changed. The repository "
          "is only modified when that part requires edits.");
    e << YAML::Key << "arguments" << YAML::Value << YAML::BeginSeq << YAML::BeginMap;
    e << YAML::Key << "name" << YAML::Value << "context";
    e << YAML::Key << "type" << YAML::Value << "string";
    e << YAML::Key << "description" << YAML::Value << YAML::DoubleQuoted
      << "What the subagent should work on, with any relevant file paths.";
    e << YAML::Key << "required" << YAML::Value << true;
    e << YAML::EndMap << YAML::EndSeq;
    e << YAML::Key << "subagent" << YAML::Value << true;
    e << YAML::EndMap << YAML::EndMap;
    return "A " + *it + " subagent covers " + focus + " without overlapping the previous subagents.\n" +
           fenced_yaml(e);
}

std::string templates_reply(const llm::ChatExchange& ex) {
    std::string name = "subagent";
    for (const auto& m : ex.messages) {
        if (m.content.starts_with("SUBAGENT DESCRIPTION")) {
            const auto blocks = llm::fenced_blocks(m.content);
            if (!blocks.empty()) {
                const auto doc = YAML::Load(blocks.front().body);
                if (doc.IsMap() && doc.size() == 1) name = doc.begin()->first.as<std::string>();
            }
        }
    }
    std::ostringstream os;
    os << "The templates keep the base layout and only fill in the role.\n"
       << "```yaml\n"
       << "system_template: |\n"
       << "  You are a helpful " << name << " assistant that can interact with a computer to complete one step of "
       << "resolving an issue.\n"
       << "  You have access to the following functions:\n"
       << "  {{command_docs}}\n"
       << "\n"
       << "  <pr_description>\n"
       << "  {{problem_statement}}\n"
       << "  </pr_description>\n"
       << "\n"
       << "  CRITICAL: Use the submit_subagent function to provide the results when you are finished with your task.\n"
       << "instance_template: |-\n"
       << "\n"
       << "  Your task:\n"
       << "  Carry out the " << name << " step described here:\n"
       << "  {{context}}\n"
       << "  When you are finished, immediately call submit_subagent with a short summary.\n"
       << "```";
    return os.str();
}

std::string warmup_reply(const llm::ChatExchange& ex) {
    const auto prompt = first_message(ex);
    const auto cfg = prompt.rfind("CURRENT SUBAGENT CONFIGURATION\n");
    const auto current = line_after(prompt, "\ncontext_description: ", cfg == std::string::npos ? 0 : cfg);
    if (current.find(kWarmupNote) != std::string::npos)
        return "The subagent is discoverable and was called correctly.\n```yaml\nupdates: {}\n```";
    YAML::Emitter e;
    e << YAML::BeginMap << YAML::Key << "updates" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "context_description" << YAML::Value << YAML::DoubleQuoted
      << (current.empty() ? std::string(kWarmupNote) : current + " " + std::string(kWarmupNote));
    e << YAML::EndMap << YAML::EndMap;
    return "The main agent passed too little context; the argument description should ask for it.\n" + fenced_yaml(e);
}

std::string plan_reply(const llm::ChatExchange& ex) {
    const auto prompt = first_message(ex);
    const auto open = prompt.find("<available_subagents>\n");
    const auto close = prompt.find("</available_subagents>", open);
    std::vector<std::string> names;
    if (open != std::string::npos && close != std::string::npos) {
        std::istringstream in(prompt.substr(open, close - open));
        std::string line;
        while (std::getline(in, line)) {
            const auto p = line.find("- name: ");
            if (p == std::string::npos) continue;
            const auto start = p + 8;
            const auto dash = line.find(" \xE2\x80\x94 ", start);  // em dash
            names.push_back(line.substr(start, dash == std::string::npos ? std::string::npos : dash - start));
        }
    }
    // At most four subagent steps so the plan stays within seven.
    const std::size_t lines = std::min<std::size_t>(names.size(), 4);
    std::vector<std::vector<std::string>> groups(lines);
    for (std::size_t i = 0; i < names.size(); ++i) groups[i % lines].push_back(names[i]);
    std::ostringstream os;
    std::size_t step = 0;
    os << ++step << ". Read the problem description and pin down the behavior that has to change.\n";
    for (const auto& g : groups) {
        std::vector<std::string> parts;
        for (const auto& n : g) parts.push_back("Use the " + n + " subagent to handle the part of the issue it is built for");
        os << ++step << ". " << join(parts, "; ") << ".\n";
    }
    os << ++step << ". " << kCleanupStep << "\n" << ++step << ". " << kSubmitStep;
    return os.str();
}

std::string judge_reply(const llm::ChatExchange& ex) {
    const auto prompt = first_message(ex);
    const auto tp = prompt.rfind("TOOL TO ANALYZE: ");
    const auto tool = line_after(prompt, "TOOL TO ANALYZE: ", tp == std::string::npos ? 0 : tp);
    const std::string end_marker = "\n\nTOOL TO ANALYZE: ";
    const auto limit = tp == std::string::npos ? prompt.size() : tp;
    bool called = false;
    bool progressed = false;
    std::size_t pos = 0;
    while (true) {
        const auto h = prompt.find("SUBAGENT TRAJECTORY ", pos);
        if (h == std::string::npos || h >= limit) break;
        const auto header_end = prompt.find('\n', h);
        const auto colon = prompt.find(": ", h);
        const auto name = prompt.substr(colon + 2, header_end - colon - 2);
        auto next = prompt.find("\nSUBAGENT TRAJECTORY ", header_end);
        if (next == std::string::npos || next > limit) next = limit;
        if (name == tool) {
            called = true;
            const auto body = std::string_view(prompt).substr(header_end, next - header_end);
            progressed = progressed || body.find("OBSERVATION: achieved ") != std::string_view::npos;
        }
        pos = next;
    }
    const bool helpful = called && progressed;
    std::string why = !called ? "The main agent never called the subagent."
                      : helpful ? "The subagent completed part of the work the issue required."
                                : "The subagent was called but made no progress on the issue.";
    return "```yaml\nhelpful: " + std::string(helpful ? "true" : "false") + "\nreasoning: |\n  " + why + "\n```";
}

std::string scaffold_orchestrator_reply(const llm::ChatExchange& ex) {
    const auto system = first_message(ex);
    std::vector<std::string> tools;
    std::size_t pos = 0;
    while ((pos = system.find("---- BEGIN FUNCTION #", pos)) != std::string::npos) {
        const auto colon = system.find(": ", pos);
        const auto end = system.find(" ----", colon);
        auto name = system.substr(colon + 2, end - colon - 2);
        if (name != "submit") tools.push_back(std::move(name));
        pos = end;
    }
    const auto turns = static_cast<std::size_t>(std::count_if(
        ex.messages.begin(), ex.messages.end(), [](const llm::ChatMessage& m) { return m.role == llm::Role::assistant; }));
    if (turns < tools.size())
        return "Delegating the next step.\n<function=" + tools[turns] +
               ">\n<parameter=context>Issue summary and findings so far.</parameter>\n</function>";
    return "All steps are done.\n<function=submit>\n</function>";
}

std::string scaffold_subagent_reply(const llm::ChatExchange&) {
    return "Reporting back.\n<function=submit_subagent>\n<parameter=result>Task finished.</parameter>\n</function>";
}

}  // namespace

void install_offline_responders(llm::MockChatProvider& mock, const sim::WorldModel& world, std::uint64_t seed) {
    std::vector<ArmId> pool;
    for (const auto& [id, s] : world.arms) pool.push_back(id);
    Rng rng(seed, 0, "pool");
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);

    mock.on_template("subagent_gen_v1",
                     [pool, world](const llm::ChatExchange& ex) { return generator_reply(ex, pool, world); });
    mock.on_template("subagent_templates_v1", templates_reply);
    mock.on_template("warmup_refine_v1", warmup_reply);
    mock.on_template("orchestrator_plan_v1", plan_reply);
    mock.on_template("helpful_judge_v1", judge_reply);
    mock.on_template("scaffold_orchestrator", scaffold_orchestrator_reply);
    mock.on_template("scaffold_subagent", scaffold_subagent_reply);
}

}  // namespace boad
