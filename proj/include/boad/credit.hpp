#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>

#include "boad/llm.hpp"
#include "boad/types.hpp"

namespace boad {

enum class CreditMetric { helpfulness, success_rate };

CreditMetric credit_metric_from_string(std::string_view s);
std::string_view to_string(CreditMetric m);

/// Mean of binary labels. Empty input is a ContractError.
double helpfulness_score(std::span<const int> labels);

/// Fraction of successful trajectories among those whose subset contains `arm`,
/// regardless of whether the arm was ever invoked.
double success_rate_score(std::span<const Trajectory> trajectories, const ArmId& arm);

/// Produces one binary helpfulness label for an arm in a finished trajectory.
class Judge {
public:
    virtual ~Judge() = default;
    virtual JudgeKind kind() const = 0;
    virtual TrajectoryLabel judge(const Trajectory& trajectory, const ArmId& arm,
                                  std::string_view tool_name) = 0;
};

/// Main agent trajectory first, then each sub-agent segment in call order.
/// `names` maps arm ids to tool names; unknown ids are printed as-is.
std::string format_trajectory_text(const Trajectory& trajectory, const std::map<ArmId, std::string>& names = {});

struct JudgeVerdict {
    bool helpful = false;
    std::string reasoning;
};

/// Accepts a single ```yaml fenced block (or a bare YAML document) with a
/// boolean `helpful` key and optional `reasoning`.
JudgeVerdict parse_judge_response(std::string_view text);

inline constexpr std::string_view kJudgeFormatReminder =
    "Your previous reply could not be parsed. Respond with exactly one ```yaml block containing "
    "`helpful: true` or `helpful: false` and a `reasoning: |` block scalar.";

/// Asks a chat model through the helpfulness-judge template.
class LlmJudge final : public Judge {
public:
    explicit LlmJudge(llm::Gateway& gateway, std::map<ArmId, std::string> names = {})
        : gateway_(gateway), names_(std::move(names)) {}

    JudgeKind kind() const override { return JudgeKind::llm; }
    TrajectoryLabel judge(const Trajectory& trajectory, const ArmId& arm, std::string_view tool_name) override;

    /// Exactly the prompt sent on the first attempt.
    std::string render_prompt(const Trajectory& trajectory, std::string_view tool_name) const;

private:
    llm::Gateway& gateway_;
    std::map<ArmId, std::string> names_;
};

/// Checks the preconditions (finished trajectory, arm in subset); an arm that
/// was never invoked gets label 0 without consulting the judge.
TrajectoryLabel judge_trajectory(const Trajectory& trajectory, const ArmId& arm, std::string_view tool_name,
                                 Judge& judge);

struct CreditOptions {
    std::size_t parallelism = 1;
    std::map<ArmId, std::string> names;  // tool names for the judge prompt
};

/// Labels every (arm, trajectory) pair of the round and averages per arm.
CreditReport build_credit_report(const RoundRecord& round, CreditMetric metric, Judge* judge,
                                 const CreditOptions& options = {});

}  // namespace boad
