#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "boad/credit.hpp"
#include "boad/evaluation.hpp"
#include "boad/rng.hpp"

namespace boad::sim {

using SkillMap = std::map<std::string, double>;  // role -> probability

struct SimTask {
    std::set<std::string> required;
    double weight = 1.0;

    friend bool operator==(const SimTask&, const SimTask&) = default;
};

/// Ground truth for the desk-scale stand-in of repository work.
///
/// Every invoked arm attempts each required role and achieves it with its
/// skill probability; the orchestrator covers the role on its own with the
/// baseline probability. A task succeeds when every required role is covered.
struct WorldModel {
    std::vector<std::string> roles;
    std::map<ArmId, SkillMap> arms;
    SkillMap baseline;
    std::vector<SimTask> tasks;

    void validate() const;
    double skill(const ArmId& arm, const std::string& role) const;
    const SkillMap& skills(const ArmId& arm) const;

    friend bool operator==(const WorldModel&, const WorldModel&) = default;
};

void to_json(nlohmann::json& j, const WorldModel& w);
void from_json(const nlohmann::json& j, WorldModel& w);

WorldModel load_world(const std::string& path);

/// 10 arms on five roles, skills set to the helpfulness spectrum observed for
/// discovered sub-agents (0.982 ... 0.0); every task needs all five roles.
WorldModel calibrated_world();

/// Two strong complementary arms plus one arm with no skill at all.
WorldModel free_rider_world();

/// One simulated episode. Draw order is fixed (per required role: each arm
/// in subset order, then the baseline), so results depend only on the inputs.
Trajectory simulate_trajectory(const WorldModel& world, std::span<const ArmId> subset,
                               const std::set<std::string>& required, Rng& rng, std::uint32_t max_steps = 1000,
                               std::string instance_id = "sim");

/// Exact success probability of the process above.
double true_team_success(const WorldModel& world, std::span<const ArmId> subset,
                         const std::set<std::string>& required);

/// Task-weighted expectation of true_team_success.
double expected_team_success(const WorldModel& world, std::span<const ArmId> subset);

/// Probability that the oracle judge labels the arm helpful, averaged over tasks.
double expected_contribution(const WorldModel& world, const ArmId& arm);

/// 1 iff the arm achieved at least one required role.
int oracle_judge(const Trajectory& trajectory, const ArmId& arm);

class OracleJudge final : public Judge {
public:
    JudgeKind kind() const override { return JudgeKind::oracle; }
    TrajectoryLabel judge(const Trajectory& trajectory, const ArmId& arm, std::string_view tool_name) override;
};

struct BestSubset {
    std::vector<ArmId> subset;  // sorted
    double expected_success = 0.0;
};

/// Exhaustive argmax of expected_team_success over k-subsets; ties go to the
/// lexicographically smallest subset. Throws ContractError above `cap` subsets.
BestSubset best_subset_oracle(const WorldModel& world, std::vector<ArmId> arms, std::size_t k,
                              std::uint64_t cap = 1'000'000);

struct RoundChoice {
    std::uint64_t round = 0;
    std::vector<ArmId> subset;
    std::vector<ArmId> available;  // archive at selection time
};

struct RegretPoint {
    std::uint64_t round = 0;
    double regret = 0.0;
};

std::vector<RegretPoint> regret_curve(std::span<const RoundChoice> rounds, const WorldModel& world, std::size_t k);

// ---- evolutionary baseline --------------------------------------------------

struct Bundle {
    std::uint64_t iteration = 0;
    std::vector<ArmId> arms;
    std::map<ArmId, SkillMap> skills;
    std::map<ArmId, ArmId> design_of;  // world arm each member descends from
    double measured_success = 0.0;
    std::map<ArmId, double> measured_helpfulness;
};

/// Regenerates a whole team from the previous one and its feedback. Member j
/// is kept as a refined copy with probability equal to its measured
/// helpfulness, otherwise replaced by a fresh design drawn from the world's
/// arms (the distribution the generator samples from). Every member then gets
/// Gaussian skill jitter of `mutation_scale`, clamped to [0,1]. Ids never repeat.
Bundle evolutionary_baseline_step(const WorldModel& world, const Bundle& previous, Rng& mutation_rng,
                                  double mutation_scale);

struct EvolutionResult {
    std::vector<Bundle> bundles;
    std::size_t best_index = 0;  // highest measured success, latest on ties
    double best_true_success = 0.0;
};

/// Iteration 1 draws k distinct world arms uniformly; each later iteration
/// regenerates from the previous bundle. Every bundle is scored on every
/// design instance, so the trajectory budget is iterations x |design set|.
EvolutionResult run_evolution(const WorldModel& world, std::span<const TaskInstance> design_set,
                              std::size_t iterations, std::size_t k, std::uint64_t seed,
                              double mutation_scale = 0.05);

// ---- backend ----------------------------------------------------------------

/// Design instances whose repo_ref is "task:<j>" with j drawn by task weight.
std::vector<TaskInstance> make_design_set(const WorldModel& world, std::size_t n, std::uint64_t seed,
                                          std::uint32_t max_steps = 60);

std::set<std::string> required_roles(const WorldModel& world, const TaskInstance& instance);

class SimulatedBackend final : public EvaluationBackend {
public:
    SimulatedBackend(WorldModel world, std::uint64_t seed);

    Trajectory run(const OrchestratorPlan& plan, std::span<const SubAgentSpec> subset,
                   const TaskInstance& instance, const EvalContext& ctx) override;

    const WorldModel& world() const noexcept { return world_; }

private:
    WorldModel world_;
    std::uint64_t seed_;
};

}  // namespace boad::sim
