#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "boad/archive.hpp"
#include "boad/evaluation.hpp"
#include "boad/llm.hpp"

namespace boad {

struct ArmSummary {
    std::string name;
    std::string docstring;
};

struct GenerationRequest {
    std::vector<ArmSummary> existing_arm_summaries;
    std::optional<std::string> feedback;
    std::uint64_t round = 0;
};

/// Summaries of every archived arm, in archive order.
GenerationRequest make_generation_request(const Archive& archive, std::uint64_t round,
                                          std::optional<std::string> feedback = std::nullopt);

/// The YAML tool document the generator emits.
struct ToolDocument {
    std::string name;
    std::string signature;
    std::string docstring;
    std::string context_description;
};

/// Exactly one fenced YAML block whose single top-level key is the tool name.
/// Throws ParseError on shape problems and ContractError on a bad docstring.
ToolDocument parse_tool_document(std::string_view text);

struct GeneratedTemplates {
    std::string system_template;
    std::string instance_template;
};

GeneratedTemplates parse_subagent_templates(std::string_view text);

/// Keys a refiner may change.
struct SpecUpdates {
    std::optional<std::string> docstring;
    std::optional<std::string> context_description;
    std::optional<std::string> instance_template;

    bool empty() const { return !docstring && !context_description && !instance_template; }
    std::vector<std::string> keys() const;
    friend bool operator==(const SpecUpdates&, const SpecUpdates&) = default;
};

/// `updates:` mapping with any subset of the three keys; `{}` or null means no change.
SpecUpdates parse_updates(std::string_view text);

SubAgentSpec apply_updates(SubAgentSpec spec, const SpecUpdates& updates);

/// The PREVIOUS_ITERATION_FEEBACK binding: prior arms plus optional feedback.
std::string previous_subagents_text(const GenerationRequest& request);

std::string render_generation_prompt(const GenerationRequest& request);

/// `base`, or `base_2`, `base_3`, ... whichever is not in `taken`.
std::string unique_name(const std::string& base, const std::set<std::string>& taken);

/// Tool document, then templates; each stage gets one retry that quotes the
/// parse error. The result is validated; arm_id equals the (deduplicated) name.
SubAgentSpec generate_subagent(const GenerationRequest& request, llm::Gateway& generator);

struct WarmupEntry {
    std::uint32_t index = 0;  // 1-based warm-up round
    std::string instance_id;
    SpecUpdates applied;
    std::vector<std::string> dropped;  // keys removed by the not-called rule
    std::optional<std::string> skipped;  // why nothing was applied, if so
};

struct WarmupState {
    SubAgentSpec spec;
    std::uint32_t rounds_done = 0;
    std::vector<WarmupEntry> history;
};

struct WarmupOptions {
    std::uint64_t seed = 0;
    std::uint64_t round = 0;  // bandit round the arm is born in
};

/// Renders the refinement prompt body: the current configuration, then the trajectory.
std::string warmup_trajectories_text(const SubAgentSpec& spec, const Trajectory& trajectory);

/// W single-arm runs on seeded design instances, each followed by one
/// refiner call. Updates that would break the spec are rejected; an
/// instance_template edit is dropped when the arm was never called.
WarmupState warmup_refine(const SubAgentSpec& spec, std::span<const TaskInstance> design_set, std::uint32_t w,
                          EvaluationBackend& backend, llm::Gateway& refiner, const WarmupOptions& options = {});

}  // namespace boad
