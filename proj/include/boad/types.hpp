#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "boad/bandit.hpp"

namespace boad {

/// One design-set problem. `repo_ref` is opaque to everything but the backend.
struct TaskInstance {
    std::string instance_id;
    std::string problem_statement;
    std::string repo_ref;
    std::uint32_t max_steps = 60;

    friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

inline constexpr std::string_view kOrchestratorActor = "orchestrator";

struct Step {
    std::string actor;  // "orchestrator" or an arm id
    std::string action;
    std::string observation;

    friend bool operator==(const Step&, const Step&) = default;
};

/// A contiguous run of steps executed by one sub-agent (an option of duration `length`).
struct Segment {
    ArmId arm_id;
    std::size_t start_step = 0;
    std::size_t length = 0;

    friend bool operator==(const Segment&, const Segment&) = default;
};

/// What actually happened in a simulated trajectory; absent for real backends.
struct GroundTruth {
    std::set<std::string> required_roles;
    std::map<ArmId, std::set<std::string>> achieved;  // per invoked arm
    std::set<std::string> baseline_achieved;

    friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct Trajectory {
    std::string instance_id;
    std::vector<Step> steps;
    std::vector<Segment> segments;
    bool submitted = false;
    bool success = false;
    std::vector<ArmId> subset;
    std::optional<std::string> error;  // set when the backend failed on this instance
    std::optional<GroundTruth> ground_truth;

    /// Arms that own at least one segment.
    std::set<ArmId> invoked_arms() const;
    bool invoked(const ArmId& arm) const;
    bool in_subset(const ArmId& arm) const;

    /// Throws ContractError if the structural invariants do not hold.
    void validate(std::uint32_t max_steps) const;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct OrchestratorPlan {
    std::string plan_text;
    std::vector<ArmId> subset;
    bool customized = false;

    friend bool operator==(const OrchestratorPlan&, const OrchestratorPlan&) = default;
};

enum class JudgeKind { oracle, llm, success_proxy };

std::string_view to_string(JudgeKind k);
JudgeKind judge_kind_from_string(std::string_view s);

struct TrajectoryLabel {
    ArmId arm_id;
    std::string instance_id;
    int label = 0;
    JudgeKind judge_kind = JudgeKind::oracle;
    std::optional<std::string> reasoning;

    friend bool operator==(const TrajectoryLabel&, const TrajectoryLabel&) = default;
};

struct CreditReport {
    std::uint64_t round = 0;
    std::map<ArmId, std::vector<TrajectoryLabel>> per_arm_labels;
    std::map<ArmId, double> per_arm_score;

    friend bool operator==(const CreditReport&, const CreditReport&) = default;
};

struct RoundRecord {
    std::uint64_t round = 0;
    std::vector<ArmId> subset;
    OrchestratorPlan plan;
    std::vector<Trajectory> trajectories;
    CreditReport credit;

    friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

void to_json(nlohmann::json& j, const TaskInstance& v);
void from_json(const nlohmann::json& j, TaskInstance& v);
void to_json(nlohmann::json& j, const Step& v);
void from_json(const nlohmann::json& j, Step& v);
void to_json(nlohmann::json& j, const Segment& v);
void from_json(const nlohmann::json& j, Segment& v);
void to_json(nlohmann::json& j, const GroundTruth& v);
void from_json(const nlohmann::json& j, GroundTruth& v);
void to_json(nlohmann::json& j, const Trajectory& v);
void from_json(const nlohmann::json& j, Trajectory& v);
void to_json(nlohmann::json& j, const OrchestratorPlan& v);
void from_json(const nlohmann::json& j, OrchestratorPlan& v);
void to_json(nlohmann::json& j, const TrajectoryLabel& v);
void from_json(const nlohmann::json& j, TrajectoryLabel& v);
void to_json(nlohmann::json& j, const CreditReport& v);
void from_json(const nlohmann::json& j, CreditReport& v);
void to_json(nlohmann::json& j, const RoundRecord& v);
void from_json(const nlohmann::json& j, RoundRecord& v);

}  // namespace boad
