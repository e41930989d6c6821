#include "boad/types.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "boad/error.hpp"

namespace boad {

using nlohmann::json;

std::set<ArmId> Trajectory::invoked_arms() const {
    std::set<ArmId> out;
    for (const auto& s : segments) out.insert(s.arm_id);
    return out;
}

bool Trajectory::invoked(const ArmId& arm) const {
    return std::any_of(segments.begin(), segments.end(), [&](const Segment& s) { return s.arm_id == arm; });
}

bool Trajectory::in_subset(const ArmId& arm) const {
    return std::find(subset.begin(), subset.end(), arm) != subset.end();
}

void Trajectory::validate(std::uint32_t max_steps) const {
    if (steps.size() > max_steps)
        throw ContractError("trajectory " + instance_id + ": exceeds the step horizon");
    if (success && !submitted) throw ContractError("trajectory " + instance_id + ": success without submit");
    std::size_t prev_end = 0;
    for (const auto& seg : segments) {
        if (seg.length == 0 || seg.start_step < prev_end || seg.start_step + seg.length > steps.size())
            throw ContractError("trajectory " + instance_id + ": malformed segment for " + seg.arm_id);
        for (std::size_t i = seg.start_step; i < seg.start_step + seg.length; ++i) {
            if (steps[i].actor != seg.arm_id)
                throw ContractError("trajectory " + instance_id + ": segment step not owned by " + seg.arm_id);
        }
        prev_end = seg.start_step + seg.length;
    }
}

std::string_view to_string(JudgeKind k) {
    switch (k) {
        case JudgeKind::oracle: return "oracle";
        case JudgeKind::llm: return "llm";
        case JudgeKind::success_proxy: return "success_proxy";
    }
    return "?";
}

JudgeKind judge_kind_from_string(std::string_view s) {
    if (s == "oracle") return JudgeKind::oracle;
    if (s == "llm") return JudgeKind::llm;
    if (s == "success_proxy") return JudgeKind::success_proxy;
    throw SchemaError("unknown judge kind: " + std::string(s));
}

void to_json(json& j, const TaskInstance& v) {
    j = {{"instance_id", v.instance_id},
         {"problem_statement", v.problem_statement},
         {"repo_ref", v.repo_ref},
         {"max_steps", v.max_steps}};
}

void from_json(const json& j, TaskInstance& v) {
    v.instance_id = j.at("instance_id").get<std::string>();
    v.problem_statement = j.value("problem_statement", std::string{});
    v.repo_ref = j.value("repo_ref", std::string{});
    v.max_steps = j.value("max_steps", 60u);
    if (v.max_steps < 1) throw SchemaError("task instance " + v.instance_id + ": max_steps must be >= 1");
}

void to_json(json& j, const Step& v) {
    j = {{"actor", v.actor}, {"action", v.action}, {"observation", v.observation}};
}

void from_json(const json& j, Step& v) {
    v.actor = j.at("actor").get<std::string>();
    v.action = j.at("action").get<std::string>();
    v.observation = j.at("observation").get<std::string>();
}

void to_json(json& j, const Segment& v) {
    j = {{"arm_id", v.arm_id}, {"start_step", v.start_step}, {"length", v.length}};
}

void from_json(const json& j, Segment& v) {
    v.arm_id = j.at("arm_id").get<std::string>();
    v.start_step = j.at("start_step").get<std::size_t>();
    v.length = j.at("length").get<std::size_t>();
}

void to_json(json& j, const GroundTruth& v) {
    j = {{"required_roles", v.required_roles},
         {"achieved", v.achieved},
         {"baseline_achieved", v.baseline_achieved}};
}

void from_json(const json& j, GroundTruth& v) {
    v.required_roles = j.at("required_roles").get<std::set<std::string>>();
    v.achieved = j.at("achieved").get<std::map<ArmId, std::set<std::string>>>();
    v.baseline_achieved = j.at("baseline_achieved").get<std::set<std::string>>();
}

void to_json(json& j, const Trajectory& v) {
    j = {{"instance_id", v.instance_id}, {"steps", v.steps},     {"segments", v.segments},
         {"submitted", v.submitted},     {"success", v.success}, {"subset", v.subset}};
    if (v.error) j["error"] = *v.error;
    if (v.ground_truth) j["ground_truth"] = *v.ground_truth;
}

void from_json(const json& j, Trajectory& v) {
    v.instance_id = j.at("instance_id").get<std::string>();
    v.steps = j.at("steps").get<std::vector<Step>>();
    v.segments = j.at("segments").get<std::vector<Segment>>();
    v.submitted = j.at("submitted").get<bool>();
    v.success = j.at("success").get<bool>();
    v.subset = j.at("subset").get<std::vector<ArmId>>();
    v.error = j.contains("error") ? std::optional(j.at("error").get<std::string>()) : std::nullopt;
    v.ground_truth =
        j.contains("ground_truth") ? std::optional(j.at("ground_truth").get<GroundTruth>()) : std::nullopt;
}

void to_json(json& j, const OrchestratorPlan& v) {
    j = {{"plan_text", v.plan_text}, {"subset", v.subset}, {"customized", v.customized}};
}

void from_json(const json& j, OrchestratorPlan& v) {
    v.plan_text = j.at("plan_text").get<std::string>();
    v.subset = j.at("subset").get<std::vector<ArmId>>();
    v.customized = j.at("customized").get<bool>();
}

void to_json(json& j, const TrajectoryLabel& v) {
    j = {{"arm_id", v.arm_id},
         {"instance_id", v.instance_id},
         {"label", v.label},
         {"judge_kind", to_string(v.judge_kind)}};
    if (v.reasoning) j["reasoning"] = *v.reasoning;
}

void from_json(const json& j, TrajectoryLabel& v) {
    v.arm_id = j.at("arm_id").get<std::string>();
    v.instance_id = j.at("instance_id").get<std::string>();
    v.label = j.at("label").get<int>();
    v.judge_kind = judge_kind_from_string(j.at("judge_kind").get<std::string>());
    v.reasoning = j.contains("reasoning") ? std::optional(j.at("reasoning").get<std::string>()) : std::nullopt;
}

void to_json(json& j, const CreditReport& v) {
    j = {{"round", v.round}, {"per_arm_labels", v.per_arm_labels}, {"per_arm_score", v.per_arm_score}};
}

void from_json(const json& j, CreditReport& v) {
    v.round = j.at("round").get<std::uint64_t>();
    v.per_arm_labels = j.at("per_arm_labels").get<std::map<ArmId, std::vector<TrajectoryLabel>>>();
    v.per_arm_score = j.at("per_arm_score").get<std::map<ArmId, double>>();
}

void to_json(json& j, const RoundRecord& v) {
    j = {{"round", v.round},
         {"subset", v.subset},
         {"plan", v.plan},
         {"trajectories", v.trajectories},
         {"credit", v.credit}};
}

void from_json(const json& j, RoundRecord& v) {
    v.round = j.at("round").get<std::uint64_t>();
    v.subset = j.at("subset").get<std::vector<ArmId>>();
    v.plan = j.at("plan").get<OrchestratorPlan>();
    v.trajectories = j.at("trajectories").get<std::vector<Trajectory>>();
    v.credit = j.at("credit").get<CreditReport>();
}

}  // namespace boad
