#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "boad/bandit.hpp"

namespace boad {

enum class Origin { bootstrap, crp_generated, fixture };

std::string_view to_string(Origin o);
Origin origin_from_string(std::string_view s);

inline constexpr std::string_view kSubagentDocPrefix = "[subagent]";
inline constexpr std::string_view kContextPlaceholder = "{{context}}";

/// A candidate sub-agent, i.e. one bandit arm.
///
/// The tool takes exactly one string argument named `context`; that contract
/// is implicit in the type and rendered by the scaffold adapter.
struct SubAgentSpec {
    ArmId arm_id;
    std::string name;
    std::string docstring;
    std::string context_description;
    std::string instance_template;
    std::string system_template;
    std::uint64_t created_round = 0;
    Origin origin = Origin::crp_generated;

    /// Throws ContractError naming the first violated invariant.
    void validate() const;

    /// instance_template with every {{context}} replaced by `context`.
    std::string render_instance(std::string_view context) const;

    friend bool operator==(const SubAgentSpec&, const SubAgentSpec&) = default;
};

enum class RankMetric { helpfulness_mean, success_rate_mean };

RankMetric rank_metric_from_string(std::string_view s);
std::string_view to_string(RankMetric m);

/// The growing set of candidate sub-agents plus their bandit statistics.
class Archive {
public:
    explicit Archive(double theta = 2.0, std::uint64_t round_cursor = 0);

    double theta() const noexcept { return theta_; }
    std::uint64_t round_cursor() const noexcept { return round_cursor_; }
    void set_round_cursor(std::uint64_t r);

    std::size_t size() const noexcept { return arms_.size(); }
    bool empty() const noexcept { return arms_.empty(); }
    bool contains(const ArmId& id) const { return stats_.contains(id); }

    const std::vector<SubAgentSpec>& arms() const noexcept { return arms_; }
    const SubAgentSpec& arm(const ArmId& id) const;
    const ArmStats& stats(const ArmId& id) const;

    /// Statistics in archive (creation) order.
    std::vector<ArmStats> stats_in_order() const;

    /// Registers a new arm with zero samples, stamped with the current round cursor.
    void add_arm(SubAgentSpec spec);

    /// Replaces the statistics of an existing arm.
    void update_stats(const ArmStats& s);

    friend bool operator==(const Archive&, const Archive&) = default;

private:
    std::vector<SubAgentSpec> arms_;
    std::map<ArmId, ArmStats> stats_;
    double theta_;
    std::uint64_t round_cursor_;
};

/// True iff `draw` < theta / (theta + archive_size).
bool crp_expansion_decision(double theta, std::uint64_t archive_size, double draw);

/// Value-returning form of Archive::add_arm.
Archive add_arm(Archive archive, SubAgentSpec spec);

/// Up to k sampled arms ordered by the metric (desc), then n desc, then arm_id asc.
std::vector<ArmId> rank_arms(const Archive& archive, RankMetric metric, std::size_t k);

std::string snapshot(const Archive& archive);
Archive restore(std::string_view bytes);

/// Number of arms added by the CRP rule over `rounds` rounds, starting from
/// `initial_size` arms, using the same draw substream as the optimizer loop.
std::uint64_t simulate_crp_growth(double theta, std::uint64_t initial_size, std::uint64_t rounds,
                                  std::uint64_t seed);

void to_json(nlohmann::json& j, const SubAgentSpec& s);
void from_json(const nlohmann::json& j, SubAgentSpec& s);

}  // namespace boad
