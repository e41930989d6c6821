#include "boad/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "boad/error.hpp"

namespace boad {

std::optional<double> ArmStats::mean() const {
    if (sample_count == 0) return std::nullopt;
    return label_sum / static_cast<double>(sample_count);
}

std::optional<double> ArmStats::success_mean() const {
    if (sample_count == 0) return std::nullopt;
    return success_sum / static_cast<double>(sample_count);
}

double ucb_score(std::optional<double> mean, std::uint64_t n, std::uint64_t t) {
    if (t == 0) throw ContractError("ucb_score: round index t must be >= 1");
    if (n == 0) {
        if (mean) throw ContractError("ucb_score: mean given for an arm with no samples");
        return std::numeric_limits<double>::infinity();
    }
    if (!mean) throw ContractError("ucb_score: mean missing for an arm with samples");
    return *mean + std::sqrt(2.0 * std::log(static_cast<double>(t)) / static_cast<double>(n));
}

SelectionResult select_top_k(std::span<const ArmStats> stats, std::uint64_t t, std::uint64_t k) {
    if (stats.empty()) throw ContractError("select_top_k: empty archive");
    if (k == 0) throw ContractError("select_top_k: k must be positive");

    std::vector<double> score(stats.size());
    for (std::size_t i = 0; i < stats.size(); ++i)
        score[i] = ucb_score(stats[i].mean(), stats[i].sample_count, t);

    std::vector<std::size_t> order(stats.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (score[a] != score[b]) return score[a] > score[b];
        if (stats[a].created_round != stats[b].created_round)
            return stats[a].created_round < stats[b].created_round;
        return stats[a].arm_id < stats[b].arm_id;
    });

    SelectionResult result;
    result.round = t;
    const auto take = std::min<std::size_t>(k, stats.size());
    for (std::size_t i = 0; i < take; ++i) result.chosen.push_back(stats[order[i]].arm_id);
    for (std::size_t i = 0; i < stats.size(); ++i) result.scores[stats[i].arm_id] = score[i];
    if (result.scores.size() != stats.size())
        throw ContractError("select_top_k: duplicate arm ids in statistics");
    return result;
}

namespace {

double checked_binary_sum(std::span<const int> values, const char* what) {
    if (values.empty()) throw ContractError(std::string(what) + ": empty batch");
    double sum = 0.0;
    for (int v : values) {
        if (v != 0 && v != 1) throw ContractError(std::string(what) + ": values must be 0 or 1");
        sum += v;
    }
    return sum;
}

}  // namespace

ArmStats record_samples(ArmStats stats, std::span<const int> labels) {
    stats.label_sum += checked_binary_sum(labels, "record_samples");
    stats.sample_count += labels.size();
    return stats;
}

ArmStats record_successes(ArmStats stats, std::span<const int> successes) {
    stats.success_sum += checked_binary_sum(successes, "record_successes");
    return stats;
}

nlohmann::json score_to_json(double score) {
    if (std::isinf(score) && score > 0) return "+inf";
    return score;
}

double score_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "+inf") return std::numeric_limits<double>::infinity();
        throw SchemaError("bad score value: " + j.dump());
    }
    return j.get<double>();
}

void to_json(nlohmann::json& j, const SelectionResult& s) {
    nlohmann::json scores = nlohmann::json::object();
    for (const auto& [id, v] : s.scores) scores[id] = score_to_json(v);
    j = {{"round", s.round}, {"chosen", s.chosen}, {"scores", scores}};
}

void from_json(const nlohmann::json& j, SelectionResult& s) {
    s.round = j.at("round").get<std::uint64_t>();
    s.chosen = j.at("chosen").get<std::vector<ArmId>>();
    s.scores.clear();
    for (const auto& [id, v] : j.at("scores").items()) s.scores[id] = score_from_json(v);
}

}  // namespace boad
