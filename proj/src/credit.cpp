#include "boad/credit.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "boad/error.hpp"
#include "boad/parallel.hpp"

namespace boad {

CreditMetric credit_metric_from_string(std::string_view s) {
    if (s == "helpfulness") return CreditMetric::helpfulness;
    if (s == "success_rate" || s == "success-rate") return CreditMetric::success_rate;
    throw ContractError("unknown credit metric: " + std::string(s));
}

std::string_view to_string(CreditMetric m) {
    return m == CreditMetric::helpfulness ? "helpfulness" : "success_rate";
}

double helpfulness_score(std::span<const int> labels) {
    if (labels.empty()) throw ContractError("helpfulness_score: no labels");
    double sum = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw ContractError("helpfulness_score: labels must be binary");
        sum += l;
    }
    return sum / static_cast<double>(labels.size());
}

double success_rate_score(std::span<const Trajectory> trajectories, const ArmId& arm) {
    if (trajectories.empty()) throw ContractError("success_rate_score: no trajectories");
    std::size_t wins = 0;
    for (const auto& t : trajectories) {
        if (!t.in_subset(arm))
            throw ContractError("success_rate_score: " + arm + " not in subset of " + t.instance_id);
        wins += t.success ? 1 : 0;
    }
    return static_cast<double>(wins) / static_cast<double>(trajectories.size());
}

std::string format_trajectory_text(const Trajectory& trajectory, const std::map<ArmId, std::string>& names) {
    auto name_of = [&](const ArmId& id) {
        auto it = names.find(id);
        return it == names.end() ? id : it->second;
    };
    std::vector<bool> in_segment(trajectory.steps.size(), false);
    for (const auto& seg : trajectory.segments) {
        for (std::size_t i = seg.start_step; i < seg.start_step + seg.length && i < in_segment.size(); ++i)
            in_segment[i] = true;
    }

    std::ostringstream os;
    os << "MAIN AGENT TRAJECTORY (instance " << trajectory.instance_id << ")\n";
    std::size_t n = 0;
    for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
        if (in_segment[i]) continue;
        const auto& s = trajectory.steps[i];
        os << "[step " << ++n << "] ACTION: " << s.action << "\nOBSERVATION: " << s.observation << "\n";
    }
    os << "RESULT: " << (trajectory.submitted ? "submitted" : "not submitted");
    if (trajectory.error) os << " (error: " << *trajectory.error << ")";
    os << "\n";

    std::size_t call = 0;
    for (const auto& seg : trajectory.segments) {
        os << "\nSUBAGENT TRAJECTORY " << ++call << ": " << name_of(seg.arm_id) << "\n";
        for (std::size_t i = 0; i < seg.length; ++i) {
            const auto& s = trajectory.steps[seg.start_step + i];
            os << "[step " << (i + 1) << "] ACTION: " << s.action << "\nOBSERVATION: " << s.observation << "\n";
        }
    }
    return os.str();
}

JudgeVerdict parse_judge_response(std::string_view text) {
    const auto blocks = llm::fenced_blocks(text);
    if (blocks.size() > 1) throw ParseError("judge response: expected one YAML block, found " +
                                            std::to_string(blocks.size()));
    const std::string doc = blocks.empty() ? std::string(text) : blocks.front().body;
    YAML::Node node;
    try {
        node = YAML::Load(doc);
    } catch (const YAML::Exception& e) {
        throw ParseError(std::string("judge response: invalid YAML: ") + e.what());
    }
    if (!node.IsMap()) throw ParseError("judge response: expected a mapping");
    const auto helpful = node["helpful"];
    if (!helpful || !helpful.IsScalar()) throw ParseError("judge response: missing 'helpful' key");
    const auto& raw = helpful.Scalar();
    JudgeVerdict v;
    if (raw == "true" || raw == "True") {
        v.helpful = true;
    } else if (raw == "false" || raw == "False") {
        v.helpful = false;
    } else {
        throw ParseError("judge response: 'helpful' must be true or false, got '" + raw + "'");
    }
    if (const auto r = node["reasoning"]; r && r.IsScalar()) v.reasoning = r.Scalar();
    while (!v.reasoning.empty() && v.reasoning.back() == '\n') v.reasoning.pop_back();
    return v;
}

std::string LlmJudge::render_prompt(const Trajectory& trajectory, std::string_view tool_name) const {
    return llm::render_template("helpful_judge_v1", {{"TRAJECTORIES", format_trajectory_text(trajectory, names_)},
                                                     {"TOOL_NAME", std::string(tool_name)}});
}

TrajectoryLabel LlmJudge::judge(const Trajectory& trajectory, const ArmId& arm, std::string_view tool_name) {
    llm::ChatExchange ex;
    ex.template_id = "helpful_judge_v1";
    ex.messages.push_back({llm::Role::user, render_prompt(trajectory, tool_name)});

    auto reply = gateway_.complete(ex);
    JudgeVerdict verdict;
    try {
        verdict = parse_judge_response(reply);
    } catch (const ParseError&) {
        ex.messages.push_back({llm::Role::assistant, reply});
        ex.messages.push_back({llm::Role::user, std::string(kJudgeFormatReminder)});
        reply = gateway_.complete(ex);
        try {
            verdict = parse_judge_response(reply);
        } catch (const ParseError& e) {
            throw ParseError(std::string("judge reply unparseable after retry: ") + e.what());
        }
    }
    return {arm, trajectory.instance_id, verdict.helpful ? 1 : 0, JudgeKind::llm, verdict.reasoning};
}

TrajectoryLabel judge_trajectory(const Trajectory& trajectory, const ArmId& arm, std::string_view tool_name,
                                 Judge& judge) {
    if (!trajectory.in_subset(arm))
        throw ContractError("judge: arm " + arm + " was not available in " + trajectory.instance_id);
    if (!trajectory.submitted && !trajectory.error)
        throw ContractError("judge: trajectory " + trajectory.instance_id + " has not terminated");
    // Not being called is negative evidence on its own; no judge is consulted.
    if (!trajectory.invoked(arm))
        return {arm, trajectory.instance_id, 0, judge.kind(), std::string("the subagent was not called")};
    auto label = judge.judge(trajectory, arm, tool_name);
    if (label.label != 0 && label.label != 1) throw ContractError("judge: non-binary label");
    return label;
}

namespace {

[[noreturn]] void rethrow_with_context(const std::string& ctx) {
    try {
        throw;
    } catch (const ParseError& e) {
        throw ParseError(ctx + e.what());
    } catch (const TransportError& e) {
        throw TransportError(ctx + e.what());
    } catch (const ContractError& e) {
        throw ContractError(ctx + e.what());
    } catch (const std::exception& e) {
        throw Error(ctx + e.what());
    }
}

}  // namespace

CreditReport build_credit_report(const RoundRecord& round, CreditMetric metric, Judge* judge,
                                 const CreditOptions& options) {
    if (round.trajectories.empty()) throw ContractError("build_credit_report: round has no trajectories");
    if (metric == CreditMetric::helpfulness && !judge)
        throw ContractError("build_credit_report: helpfulness metric requires a judge");

    const auto n_traj = round.trajectories.size();
    std::vector<TrajectoryLabel> labels(round.subset.size() * n_traj);

    auto label_one = [&](std::size_t idx) {
        const auto& arm = round.subset[idx / n_traj];
        const auto& traj = round.trajectories[idx % n_traj];
        if (metric == CreditMetric::success_rate) {
            if (!traj.in_subset(arm)) throw ContractError("arm not in trajectory subset");
            labels[idx] = {arm, traj.instance_id, traj.success ? 1 : 0, JudgeKind::success_proxy, std::nullopt};
            return;
        }
        try {
            auto it = options.names.find(arm);
            const std::string tool = it == options.names.end() ? arm : it->second;
            labels[idx] = judge_trajectory(traj, arm, tool, *judge);
        } catch (...) {
            rethrow_with_context("judging arm " + arm + " on instance " + traj.instance_id + ": ");
        }
    };
    parallel_for(labels.size(), metric == CreditMetric::success_rate ? 1 : options.parallelism, label_one);

    CreditReport report;
    report.round = round.round;
    for (std::size_t a = 0; a < round.subset.size(); ++a) {
        const auto& arm = round.subset[a];
        auto& bucket = report.per_arm_labels[arm];
        std::vector<int> values;
        for (std::size_t t = 0; t < n_traj; ++t) {
            bucket.push_back(labels[a * n_traj + t]);
            values.push_back(bucket.back().label);
        }
        report.per_arm_score[arm] = helpfulness_score(values);
    }
    return report;
}

}  // namespace boad
