#include "boad/agent_factory.hpp"

#include <algorithm>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "boad/credit.hpp"
#include "boad/error.hpp"
#include "boad/rng.hpp"

namespace boad {

namespace {

YAML::Node load_single_block(std::string_view text, std::string_view what) {
    const auto blocks = llm::fenced_blocks(text);
    if (blocks.size() != 1)
        throw ParseError(std::string(what) + ": expected exactly one YAML block, found " +
                         std::to_string(blocks.size()));
    try {
        return YAML::Load(blocks.front().body);
    } catch (const YAML::Exception& e) {
        throw ParseError(std::string(what) + ": invalid YAML: " + e.what());
    }
}

bool yaml_true(const YAML::Node& n) {
    return n && n.IsScalar() && (n.Scalar() == "true" || n.Scalar() == "True");
}

std::string scalar(const YAML::Node& parent, const char* key, std::string_view what) {
    const auto n = parent[key];
    if (!n || !n.IsScalar()) throw ParseError(std::string(what) + ": missing string field '" + key + "'");
    return n.Scalar();
}

bool is_token(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_' || c == '-';
    });
}

std::string tool_yaml(const ToolDocument& doc) {
    YAML::Emitter out;
    out << YAML::BeginMap << YAML::Key << doc.name << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "signature" << YAML::Value << YAML::DoubleQuoted << doc.signature;
    out << YAML::Key << "docstring" << YAML::Value << YAML::DoubleQuoted << doc.docstring;
    out << YAML::Key << "arguments" << YAML::Value << YAML::BeginSeq << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << "context";
    out << YAML::Key << "type" << YAML::Value << "string";
    out << YAML::Key << "description" << YAML::Value << YAML::DoubleQuoted << doc.context_description;
    out << YAML::Key << "required" << YAML::Value << true;
    out << YAML::EndMap << YAML::EndSeq;
    out << YAML::Key << "subagent" << YAML::Value << true;
    out << YAML::EndMap << YAML::EndMap;
    return out.c_str();
}

// One completion plus, on a rejected reply, a single retry that quotes the error.
template <typename Parse>
auto complete_with_retry(llm::Gateway& gw, llm::ChatExchange ex, Parse parse, std::string_view reminder) {
    auto reply = gw.complete(ex);
    try {
        return parse(reply);
    } catch (const ParseError& e) {
        ex.messages.push_back({llm::Role::assistant, reply});
        ex.messages.push_back({llm::Role::user, "Your previous output was rejected: " + std::string(e.what()) +
                                                    ". " + std::string(reminder)});
    } catch (const ContractError& e) {
        ex.messages.push_back({llm::Role::assistant, reply});
        ex.messages.push_back({llm::Role::user, "Your previous output was rejected: " + std::string(e.what()) +
                                                    ". " + std::string(reminder)});
    }
    return parse(gw.complete(ex));
}

constexpr std::string_view kToolReminder =
    "Output exactly ONE ```yaml block with the tool under a single key, a docstring starting with "
    "\"[subagent]\", a single required string argument named context, and subagent: true.";
constexpr std::string_view kTemplatesReminder =
    "Output exactly ONE ```yaml block with system_template and instance_template literal blocks; the "
    "instance_template must contain {{context}}.";

}  // namespace

GenerationRequest make_generation_request(const Archive& archive, std::uint64_t round,
                                          std::optional<std::string> feedback) {
    GenerationRequest r;
    r.round = round;
    r.feedback = std::move(feedback);
    for (const auto& a : archive.arms()) r.existing_arm_summaries.push_back({a.name, a.docstring});
    return r;
}

ToolDocument parse_tool_document(std::string_view text) {
    constexpr std::string_view what = "tool document";
    const auto root = load_single_block(text, what);
    if (!root.IsMap() || root.size() != 1)
        throw ParseError("tool document: expected a single top-level key naming the tool");
    const auto entry = *root.begin();
    ToolDocument doc;
    doc.name = entry.first.as<std::string>();
    if (!is_token(doc.name)) throw ParseError("tool document: invalid tool name '" + doc.name + "'");
    const auto body = entry.second;
    if (!body.IsMap()) throw ParseError("tool document: tool body must be a mapping");

    doc.signature = scalar(body, "signature", what);
    doc.docstring = scalar(body, "docstring", what);
    const auto args = body["arguments"];
    if (!args || !args.IsSequence()) throw ParseError("tool document: missing 'arguments' list");
    if (args.size() != 1)
        throw ParseError("tool document: expected exactly one argument, found " + std::to_string(args.size()));
    const auto arg = args[0];
    if (!arg.IsMap()) throw ParseError("tool document: argument must be a mapping");
    if (scalar(arg, "name", what) != "context") throw ParseError("tool document: the argument must be named context");
    if (scalar(arg, "type", what) != "string") throw ParseError("tool document: context must have type string");
    if (!yaml_true(arg["required"])) throw ParseError("tool document: context must be required");
    doc.context_description = scalar(arg, "description", what);
    if (!yaml_true(body["subagent"])) throw ParseError("tool document: 'subagent: true' is required");

    if (!std::string_view(doc.docstring).starts_with(kSubagentDocPrefix))
        throw ContractError("tool document: docstring must start with \"[subagent]\"");
    return doc;
}

GeneratedTemplates parse_subagent_templates(std::string_view text) {
    constexpr std::string_view what = "subagent templates";
    const auto root = load_single_block(text, what);
    if (!root.IsMap()) throw ParseError("subagent templates: expected a mapping");
    GeneratedTemplates t{scalar(root, "system_template", what), scalar(root, "instance_template", what)};
    if (t.instance_template.find(kContextPlaceholder) == std::string::npos)
        throw ContractError("subagent templates: instance_template lacks the {{context}} placeholder");
    return t;
}

std::vector<std::string> SpecUpdates::keys() const {
    std::vector<std::string> k;
    if (docstring) k.emplace_back("docstring");
    if (context_description) k.emplace_back("context_description");
    if (instance_template) k.emplace_back("instance_template");
    return k;
}

SpecUpdates parse_updates(std::string_view text) {
    constexpr std::string_view what = "updates";
    const auto root = load_single_block(text, what);
    if (!root.IsMap() || !root["updates"]) throw ParseError("updates: top-level key must be 'updates'");
    if (root.size() != 1) throw ParseError("updates: unexpected top-level keys");
    const auto u = root["updates"];
    SpecUpdates out;
    if (u.IsNull()) return out;
    if (!u.IsMap()) throw ParseError("updates: 'updates' must be a mapping");
    for (const auto& kv : u) {
        const auto key = kv.first.as<std::string>();
        if (!kv.second.IsScalar()) throw ParseError("updates: value of '" + key + "' must be a string");
        auto value = kv.second.Scalar();
        if (key == "docstring") {
            out.docstring = std::move(value);
        } else if (key == "context_description") {
            out.context_description = std::move(value);
        } else if (key == "instance_template") {
            out.instance_template = std::move(value);
        } else {
            throw ParseError("updates: unknown key '" + key + "'");
        }
    }
    return out;
}

SubAgentSpec apply_updates(SubAgentSpec spec, const SpecUpdates& updates) {
    if (updates.docstring) spec.docstring = *updates.docstring;
    if (updates.context_description) spec.context_description = *updates.context_description;
    if (updates.instance_template) spec.instance_template = *updates.instance_template;
    return spec;
}

std::string previous_subagents_text(const GenerationRequest& request) {
    std::ostringstream os;
    os << "PREVIOUS SUBAGENTS\n";
    if (request.existing_arm_summaries.empty()) os << "(none)\n";
    for (const auto& s : request.existing_arm_summaries) os << "- " << s.name << ": " << s.docstring << "\n";
    if (request.feedback && !request.feedback->empty()) os << "\nFEEDBACK\n" << *request.feedback << "\n";
    return os.str();
}

std::string render_generation_prompt(const GenerationRequest& request) {
    return llm::render_template("subagent_gen_v1", {{"PREVIOUS_ITERATION_FEEBACK", previous_subagents_text(request)}});
}

std::string unique_name(const std::string& base, const std::set<std::string>& taken) {
    if (!taken.contains(base)) return base;
    for (std::size_t i = 2;; ++i) {
        auto candidate = base + "_" + std::to_string(i);
        if (!taken.contains(candidate)) return candidate;
    }
}

SubAgentSpec generate_subagent(const GenerationRequest& request, llm::Gateway& generator) {
    llm::ChatExchange gen;
    gen.template_id = "subagent_gen_v1";
    gen.messages.push_back({llm::Role::user, render_generation_prompt(request)});
    auto doc = complete_with_retry(generator, gen, parse_tool_document, kToolReminder);

    std::set<std::string> taken;
    for (const auto& s : request.existing_arm_summaries) taken.insert(s.name);
    doc.name = unique_name(doc.name, taken);

    llm::ChatExchange tpl;
    tpl.template_id = "subagent_templates_v1";
    tpl.messages.push_back(
        {llm::Role::system, llm::render_template("subagent_templates_v1", {{"PREVIOUS_ITERATION_FEEDBACK", ""}})});
    tpl.messages.push_back({llm::Role::user, "SUBAGENT DESCRIPTION\n```yaml\n" + tool_yaml(doc) + "\n```"});
    const auto templates = complete_with_retry(generator, tpl, parse_subagent_templates, kTemplatesReminder);

    SubAgentSpec spec;
    spec.arm_id = doc.name;
    spec.name = doc.name;
    spec.docstring = doc.docstring;
    spec.context_description = doc.context_description;
    spec.system_template = templates.system_template;
    spec.instance_template = templates.instance_template;
    spec.created_round = request.round;
    spec.origin = Origin::crp_generated;
    spec.validate();
    return spec;
}

std::string warmup_trajectories_text(const SubAgentSpec& spec, const Trajectory& trajectory) {
    std::ostringstream os;
    os << "CURRENT SUBAGENT CONFIGURATION\n"
       << "name: " << spec.name << "\n"
       << "docstring: " << spec.docstring << "\n"
       << "context_description: " << spec.context_description << "\n"
       << "instance_template:\n"
       << spec.instance_template << "\n\n";
    if (!trajectory.invoked(spec.arm_id)) os << "NOTE: the subagent was not called in this trajectory.\n\n";
    os << format_trajectory_text(trajectory, {{spec.arm_id, spec.name}});
    return os.str();
}

WarmupState warmup_refine(const SubAgentSpec& spec, std::span<const TaskInstance> design_set, std::uint32_t w,
                          EvaluationBackend& backend, llm::Gateway& refiner, const WarmupOptions& options) {
    if (w < 1) throw ContractError("warmup_refine: W must be at least 1");
    if (design_set.empty()) throw ContractError("warmup_refine: empty design set");
    spec.validate();

    WarmupState state{spec, 0, {}};
    const std::string purpose = "warmup/" + spec.arm_id;
    for (std::uint32_t i = 1; i <= w; ++i) {
        WarmupEntry entry;
        entry.index = i;
        Rng pick(options.seed, options.round, purpose + "/instance", i);
        const auto& instance = design_set[pick.below(design_set.size())];
        entry.instance_id = instance.instance_id;

        const std::vector<SubAgentSpec> subset{state.spec};
        const auto plan = generic_plan({state.spec.arm_id});
        Trajectory traj;
        try {
            traj = backend.run(plan, subset, instance, EvalContext{options.round, i, purpose});
        } catch (const Error& e) {
            entry.skipped = std::string("evaluation failed: ") + e.what();
        }

        if (!entry.skipped) {
            llm::ChatExchange ex;
            ex.template_id = "warmup_refine_v1";
            ex.messages.push_back({llm::Role::user,
                                   llm::render_template("warmup_refine_v1",
                                                        {{"TRAJECTORIES", warmup_trajectories_text(state.spec, traj)}})});
            try {
                auto updates = parse_updates(refiner.complete(ex));
                if (updates.instance_template && !traj.invoked(state.spec.arm_id)) {
                    updates.instance_template.reset();
                    entry.dropped.emplace_back("instance_template");
                }
                auto candidate = apply_updates(state.spec, updates);
                candidate.validate();
                state.spec = std::move(candidate);
                entry.applied = std::move(updates);
            } catch (const ParseError& e) {
                entry.skipped = std::string("unparseable refiner output: ") + e.what();
            } catch (const ContractError& e) {
                entry.skipped = std::string("rejected update: ") + e.what();
            } catch (const TransportError& e) {
                entry.skipped = std::string("refiner unavailable: ") + e.what();
            }
        }
        state.history.push_back(std::move(entry));
        ++state.rounds_done;
    }
    return state;
}

}  // namespace boad
