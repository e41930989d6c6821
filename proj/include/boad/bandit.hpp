#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace boad {

using ArmId = std::string;

/// Per-arm sufficient statistics backing the UCB score.
///
/// `label_sum` accumulates the credit labels that drive selection. The
/// orthogonal `success_sum` counts the successful trajectories the arm took
/// part in, so an archive can be ranked by either helpfulness or raw success
/// rate after the fact.
struct ArmStats {
    ArmId arm_id;
    std::uint64_t sample_count = 0;
    double label_sum = 0.0;
    double success_sum = 0.0;
    std::uint64_t created_round = 0;

    std::optional<double> mean() const;
    std::optional<double> success_mean() const;

    friend bool operator==(const ArmStats&, const ArmStats&) = default;
};

struct SelectionResult {
    std::uint64_t round = 0;
    std::vector<ArmId> chosen;
    std::map<ArmId, double> scores;  // +inf for never-sampled arms

    friend bool operator==(const SelectionResult&, const SelectionResult&) = default;
};

/// mean + sqrt(2 ln t / n), or +inf when the arm has no samples yet.
/// Throws ContractError when t == 0 or when `mean` presence disagrees with n.
double ucb_score(std::optional<double> mean, std::uint64_t n, std::uint64_t t);

/// Picks min(k, |stats|) arms by (UCB desc, created_round asc, arm_id asc).
SelectionResult select_top_k(std::span<const ArmStats> stats, std::uint64_t t, std::uint64_t k);

/// Folds a batch of binary labels into the statistics.
ArmStats record_samples(ArmStats stats, std::span<const int> labels);

/// Folds trajectory success flags into `success_sum`; sample_count is left to
/// record_samples, which is always called with a batch of the same length.
ArmStats record_successes(ArmStats stats, std::span<const int> successes);

void to_json(nlohmann::json& j, const SelectionResult& s);
void from_json(const nlohmann::json& j, SelectionResult& s);

/// Scores are serialized as numbers, with "+inf" for the forced-exploration value.
nlohmann::json score_to_json(double score);
double score_from_json(const nlohmann::json& j);

}  // namespace boad
