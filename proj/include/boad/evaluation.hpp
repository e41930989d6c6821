#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "boad/archive.hpp"
#include "boad/llm.hpp"
#include "boad/types.hpp"

namespace boad {

/// Identifies which random substream a backend run draws from.
struct EvalContext {
    std::uint64_t round = 0;
    std::uint64_t index = 0;
    std::string purpose = "trajectory";
};

/// Executes one (orchestrator plan, sub-agent subset) pair on one instance.
class EvaluationBackend {
public:
    virtual ~EvaluationBackend() = default;
    virtual Trajectory run(const OrchestratorPlan& plan, std::span<const SubAgentSpec> subset,
                           const TaskInstance& instance, const EvalContext& ctx) = 0;
};

inline constexpr std::string_view kCleanupStep =
    "After you have solved the issue, delete any test files or temporary files you created.";
inline constexpr std::string_view kSubmitStep = "Use the submit tool to submit the changes to the repository.";
inline constexpr std::string_view kPlannerVersion = "orchestrator_plan_v1";

/// The subset-independent plan used when orchestrator customization is off.
OrchestratorPlan generic_plan(std::vector<ArmId> subset);

/// "- name: <name> — <docstring>" lines for the planner prompt.
std::string subagents_overview(std::span<const SubAgentSpec> subset);

/// Validates planner output: 3-7 consecutively numbered steps, the fixed
/// cleanup and submit steps last, and (when `required_names` is non-empty)
/// a "Use the <name> subagent to" step for every name. Returns the normalized
/// plan text.
std::string parse_plan(std::string_view text, std::span<const std::string> required_names);

/// Plans are cached by (subset, customized, planner version).
class PlanCache {
public:
    using Key = std::tuple<std::vector<ArmId>, bool, std::string>;
    const OrchestratorPlan* find(const Key& key) const;
    void put(Key key, OrchestratorPlan plan);
    std::size_t size() const { return cache_.size(); }
    std::size_t hits() const { return hits_; }

private:
    std::map<Key, OrchestratorPlan> cache_;
    mutable std::size_t hits_ = 0;
};

/// customized=false returns generic_plan; otherwise renders the planner
/// prompt and parses its answer (one retry with a format reminder).
OrchestratorPlan build_orchestrator_plan(std::span<const SubAgentSpec> subset, bool customized,
                                         llm::Gateway* planner, PlanCache* cache = nullptr);

struct RoundOptions {
    std::size_t parallelism = 1;
    std::uint32_t transport_retries = 2;
};

/// Evaluates the subset on every instance; instance-level failures become
/// failed trajectories. The returned record has an empty credit report.
RoundRecord run_round(std::uint64_t t, std::span<const SubAgentSpec> subset, const OrchestratorPlan& plan,
                      std::span<const TaskInstance> instances, EvaluationBackend& backend,
                      const RoundOptions& options = {});

// ---- LLM scaffold adapter ---------------------------------------------------

/// Function docs for the sub-agents in the XML tool-calling convention.
std::string subagent_tool_docs(std::span<const SubAgentSpec> subset, std::size_t first_number = 1);

struct FunctionCall {
    std::string name;
    std::map<std::string, std::string> parameters;
};

/// Parses the single <function=...> call in a model turn; nullopt when absent.
std::optional<FunctionCall> parse_function_call(std::string_view text);

/// Drives an orchestrator and its sub-agents through the chat gateway. It
/// carries no repository: only sub-agent calls and submit have effects, so the
/// success flag comes from the optional verifier.
class ScaffoldBackend final : public EvaluationBackend {
public:
    using Verifier = std::function<bool(const Trajectory&, const TaskInstance&)>;

    ScaffoldBackend(llm::Gateway& gateway, std::uint32_t subagent_step_limit = 8, Verifier verifier = {});

    Trajectory run(const OrchestratorPlan& plan, std::span<const SubAgentSpec> subset,
                   const TaskInstance& instance, const EvalContext& ctx) override;

    std::string orchestrator_prompt(const OrchestratorPlan& plan, std::span<const SubAgentSpec> subset,
                                    const TaskInstance& instance) const;

private:
    llm::Gateway& gateway_;
    std::uint32_t subagent_step_limit_;
    Verifier verifier_;
};

}  // namespace boad
