#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "boad/agent_factory.hpp"
#include "boad/archive.hpp"
#include "boad/credit.hpp"
#include "boad/evaluation.hpp"
#include "boad/llm.hpp"
#include "boad/simenv.hpp"

namespace boad {

enum class BackendKind { simulated, llm_scaffold };
enum class JudgeChoice { oracle, llm };

std::string_view to_string(BackendKind k);
BackendKind backend_kind_from_string(std::string_view s);

struct ProviderSettings {
    std::string kind = "mock";  // mock | http
    std::string base_url;       // empty: BOAD_API_BASE or the built-in default
    std::string model;
    std::string credential_env = "BOAD_API_KEY";
    std::uint32_t retry_budget = 3;
    std::uint32_t timeout_ms = 120'000;
    std::uint32_t max_in_flight = 0;

    friend bool operator==(const ProviderSettings&, const ProviderSettings&) = default;
};

struct RunConfig {
    std::uint64_t budget = 20;
    std::uint64_t team_size = 3;
    std::uint32_t warmup_rounds = 4;
    double theta = 2.0;
    std::uint64_t bootstrap_size = 3;
    std::vector<TaskInstance> design_set;  // empty: synthesized from the world
    std::uint64_t design_set_size = 12;
    std::uint64_t instances_per_round = 0;  // 0: the whole design set every round
    CreditMetric credit_metric = CreditMetric::helpfulness;
    bool customized_orchestrator = true;
    bool expansion_enabled = true;
    BackendKind evaluation_backend = BackendKind::simulated;
    std::uint64_t seed = 0;
    std::uint64_t export_top_k = 2;

    std::optional<sim::WorldModel> world;  // simulated backend; default calibrated_world()
    ProviderSettings provider;
    JudgeChoice judge = JudgeChoice::llm;
    std::size_t parallelism = 1;

    void validate() const;
    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

void to_json(nlohmann::json& j, const RunConfig& c);
/// Missing keys keep their defaults; unknown keys are a SchemaError. A
/// string `world` is a fixture path resolved against `base_dir`.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

// ---- event log --------------------------------------------------------------

struct RunEvent {
    std::uint64_t seq = 0;
    std::string kind;
    std::uint64_t round = 0;
    nlohmann::json payload;
    std::string timestamp;
};

std::string event_to_line(const RunEvent& e);

/// Parses and checks a whole log: every line a complete record, sequence
/// numbers 1, 2, ..., known kinds, run_start first. Throws LogError.
std::vector<RunEvent> parse_event_log(std::string_view text);
std::vector<RunEvent> read_event_log(const std::filesystem::path& path);

/// Serializes appends; timestamps are logical ("seq:<n>") unless wall-clock
/// stamps are requested, which makes the log non-reproducible.
class EventSink {
public:
    EventSink(std::ostream* out, std::uint64_t next_seq = 1, bool wallclock = false);
    const RunEvent& emit(std::string kind, std::uint64_t round, nlohmann::json payload);
    std::uint64_t last_seq() const { return next_seq_ - 1; }

private:
    std::ostream* out_;
    std::uint64_t next_seq_;
    bool wallclock_;
    RunEvent last_;
};

// ---- optimizer --------------------------------------------------------------

/// Deterministic chat responders that stand in for every prompt the loop
/// sends, driven by the world's arm list. Installed on a MockChatProvider.
void install_offline_responders(llm::MockChatProvider& mock, const sim::WorldModel& world, std::uint64_t seed);

struct RunControl {
    std::optional<std::uint64_t> stop_after_round;  // simulate an interruption
    bool wallclock_timestamps = false;
    std::ostream* call_log = nullptr;  // per-LLM-call records
};

struct RunResult {
    Archive archive;
    std::uint64_t rounds_completed = 0;
    bool finished = false;
};

/// The optimization loop from round 1 to the budget, appending events to `events`.
RunResult run_optimize(const RunConfig& config, std::ostream& events, const RunControl& control = {});

/// Continues the run recorded in `log_path` from its last committed round.
/// Mid-round events are discarded first; a finished run is a no-op.
RunResult resume(const std::filesystem::path& log_path, const RunControl& control = {});

/// Rebuilds the archive implied by committed events.
Archive replay_archive(const std::vector<RunEvent>& events);

// ---- exports and reports ----------------------------------------------------

/// Top-k specs plus a regenerated plan, as a single JSON document.
nlohmann::json export_top_k(const Archive& archive, std::size_t k, RankMetric metric, bool customized = true,
                            llm::Gateway* planner = nullptr);

struct ReportFiles {
    std::filesystem::path arms;
    std::filesystem::path selection_counts;
    std::optional<std::filesystem::path> regret;
};

/// arms.tsv, selection_counts.tsv and (simulated runs) regret.tsv.
ReportFiles write_report(const std::vector<RunEvent>& events, const std::filesystem::path& out_dir);

// ---- bandit simulation ------------------------------------------------------

enum class SimPolicy { ucb, random, greedy };

SimPolicy sim_policy_from_string(std::string_view s);

struct BanditSimOptions {
    std::uint64_t rounds = 2000;
    std::uint64_t k = 3;
    std::uint64_t instances_per_round = 1;
    SimPolicy policy = SimPolicy::ucb;
    CreditMetric metric = CreditMetric::helpfulness;
    std::uint64_t seed = 0;
};

struct BanditSimResult {
    Archive archive;
    std::map<ArmId, std::uint64_t> selection_counts;
    std::vector<sim::RoundChoice> choices;
};

/// Fixed archive of every world arm, no expansion, oracle judge.
BanditSimResult simulate_bandit(const sim::WorldModel& world, const BanditSimOptions& options);

}  // namespace boad
