#include "boad/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "boad/error.hpp"
#include "boad/rng.hpp"

namespace boad {

using nlohmann::json;

std::string_view to_string(BackendKind k) { return k == BackendKind::simulated ? "simulated" : "llm_scaffold"; }

BackendKind backend_kind_from_string(std::string_view s) {
    if (s == "simulated") return BackendKind::simulated;
    if (s == "llm_scaffold" || s == "llm") return BackendKind::llm_scaffold;
    throw ContractError("unknown evaluation backend: " + std::string(s));
}

namespace {

std::string_view to_string(JudgeChoice j) { return j == JudgeChoice::oracle ? "oracle" : "llm"; }

JudgeChoice judge_choice_from_string(std::string_view s) {
    if (s == "oracle") return JudgeChoice::oracle;
    if (s == "llm") return JudgeChoice::llm;
    throw ContractError("unknown judge: " + std::string(s));
}

}  // namespace

// ---- config -------------------------------------------------------------------

void RunConfig::validate() const {
    if (budget < 1) throw ContractError("config: budget must be >= 1");
    if (team_size < 1) throw ContractError("config: team_size must be >= 1");
    if (!(theta > 0.0) || !std::isfinite(theta)) throw ContractError("config: theta must be positive");
    if (bootstrap_size < 1) throw ContractError("config: bootstrap_size must be >= 1");
    if (export_top_k < 1) throw ContractError("config: export_top_k must be >= 1");
    if (design_set.empty() && design_set_size < 1) throw ContractError("config: design set is empty");
    if (parallelism < 1) throw ContractError("config: parallelism must be >= 1");
    if (provider.kind != "mock" && provider.kind != "http")
        throw ContractError("config: provider.kind must be mock or http");
    if (provider.retry_budget < 1) throw ContractError("config: provider.retry_budget must be >= 1");
    if (evaluation_backend == BackendKind::llm_scaffold) {
        if (judge == JudgeChoice::oracle) throw ContractError("config: the oracle judge needs the simulated backend");
        if (design_set.empty()) throw ContractError("config: the llm_scaffold backend needs an explicit design_set");
    }
    if (world) world->validate();
}

void to_json(json& j, const RunConfig& c) {
    j = {{"budget", c.budget},
         {"team_size", c.team_size},
         {"warmup_rounds", c.warmup_rounds},
         {"theta", c.theta},
         {"bootstrap_size", c.bootstrap_size},
         {"design_set", c.design_set},
         {"design_set_size", c.design_set_size},
         {"instances_per_round", c.instances_per_round},
         {"credit_metric", to_string(c.credit_metric)},
         {"customized_orchestrator", c.customized_orchestrator},
         {"expansion_enabled", c.expansion_enabled},
         {"evaluation_backend", to_string(c.evaluation_backend)},
         {"seed", c.seed},
         {"export_top_k", c.export_top_k},
         {"judge", to_string(c.judge)},
         {"parallelism", c.parallelism},
         {"provider",
          {{"kind", c.provider.kind},
           {"base_url", c.provider.base_url},
           {"model", c.provider.model},
           {"credential_env", c.provider.credential_env},
           {"retry_budget", c.provider.retry_budget},
           {"timeout_ms", c.provider.timeout_ms},
           {"max_in_flight", c.provider.max_in_flight}}}};
    if (c.world) j["world"] = *c.world;
}

RunConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw SchemaError("config: expected an object");
    static const std::set<std::string> known{
        "budget",     "team_size", "warmup_rounds",   "theta",   "bootstrap_size", "design_set",
        "design_set_size", "instances_per_round", "credit_metric", "customized_orchestrator", "expansion_enabled",
        "evaluation_backend", "seed", "export_top_k", "world", "provider", "judge", "parallelism"};
    for (const auto& [k, v] : j.items()) {
        if (!known.contains(k)) throw SchemaError("config: unknown key '" + k + "'");
    }
    RunConfig c;
    try {
        c.budget = j.value("budget", c.budget);
        c.team_size = j.value("team_size", c.team_size);
        c.warmup_rounds = j.value("warmup_rounds", c.warmup_rounds);
        c.theta = j.value("theta", c.theta);
        c.bootstrap_size = j.value("bootstrap_size", c.bootstrap_size);
        if (j.contains("design_set")) c.design_set = j.at("design_set").get<std::vector<TaskInstance>>();
        c.design_set_size = j.value("design_set_size", c.design_set_size);
        c.instances_per_round = j.value("instances_per_round", c.instances_per_round);
        if (j.contains("credit_metric"))
            c.credit_metric = credit_metric_from_string(j.at("credit_metric").get<std::string>());
        c.customized_orchestrator = j.value("customized_orchestrator", c.customized_orchestrator);
        c.expansion_enabled = j.value("expansion_enabled", c.expansion_enabled);
        if (j.contains("evaluation_backend"))
            c.evaluation_backend = backend_kind_from_string(j.at("evaluation_backend").get<std::string>());
        c.seed = j.value("seed", c.seed);
        c.export_top_k = j.value("export_top_k", c.export_top_k);
        if (j.contains("judge")) c.judge = judge_choice_from_string(j.at("judge").get<std::string>());
        c.parallelism = j.value("parallelism", c.parallelism);
        if (j.contains("world")) {
            const auto& w = j.at("world");
            if (w.is_string()) {
                std::filesystem::path p = w.get<std::string>();
                if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
                c.world = sim::load_world(p.string());
            } else {
                c.world = w.get<sim::WorldModel>();
            }
        }
        if (j.contains("provider")) {
            const auto& p = j.at("provider");
            static const std::set<std::string> pkeys{"kind",       "base_url",     "model",        "credential_env",
                                                     "retry_budget", "timeout_ms", "max_in_flight"};
            for (const auto& [k, v] : p.items()) {
                if (!pkeys.contains(k)) throw SchemaError("config: unknown provider key '" + k + "'");
            }
            c.provider.kind = p.value("kind", c.provider.kind);
            c.provider.base_url = p.value("base_url", c.provider.base_url);
            c.provider.model = p.value("model", c.provider.model);
            c.provider.credential_env = p.value("credential_env", c.provider.credential_env);
            c.provider.retry_budget = p.value("retry_budget", c.provider.retry_budget);
            c.provider.timeout_ms = p.value("timeout_ms", c.provider.timeout_ms);
            c.provider.max_in_flight = p.value("max_in_flight", c.provider.max_in_flight);
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("config: ") + e.what());
    } catch (const ContractError& e) {
        throw SchemaError(e.what());
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

// ---- event log ----------------------------------------------------------------

namespace {

const std::set<std::string>& event_kinds() {
    static const std::set<std::string> k{"run_start",       "expansion",     "warmup_update",
                                         "selection",       "plan_built",    "trajectory_done",
                                         "credit_report",   "stats_update",  "run_end"};
    return k;
}

std::string wallclock_now() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

}  // namespace

std::string event_to_line(const RunEvent& e) {
    return json{{"seq", e.seq}, {"kind", e.kind}, {"round", e.round}, {"payload", e.payload}, {"timestamp", e.timestamp}}
        .dump();
}

std::vector<RunEvent> parse_event_log(std::string_view text) {
    std::vector<RunEvent> out;
    long long last = 0;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    std::uint64_t round = 0;
    while (pos < text.size()) {
        ++line_no;
        const auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos)
            throw LogError("event log truncated mid-record at line " + std::to_string(line_no), last);
        const auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        const auto where = " at line " + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            throw LogError("malformed event record" + where, last);
        }
        RunEvent e;
        try {
            if (!j.is_object() || j.size() != 5) throw LogError("event record has the wrong fields" + where, last);
            e.seq = j.at("seq").get<std::uint64_t>();
            e.kind = j.at("kind").get<std::string>();
            e.round = j.at("round").get<std::uint64_t>();
            e.payload = j.at("payload");
            e.timestamp = j.at("timestamp").get<std::string>();
        } catch (const json::exception&) {
            throw LogError("event record has the wrong fields" + where, last);
        }
        if (e.seq != static_cast<std::uint64_t>(last) + 1)
            throw LogError("sequence number " + std::to_string(e.seq) + " out of order" + where, last);
        if (!event_kinds().contains(e.kind)) throw LogError("unknown event kind '" + e.kind + "'" + where, last);
        if (out.empty() && e.kind != "run_start") throw LogError("log does not begin with run_start", last);
        if (!out.empty() && e.kind == "run_start") throw LogError("second run_start" + where, last);
        if (!out.empty() && out.back().kind == "run_end") throw LogError("events after run_end" + where, last);
        if (e.round < round) throw LogError("round number decreases" + where, last);
        if (e.round > round && e.kind != "run_end" && out.back().kind != "stats_update")
            throw LogError("round " + std::to_string(e.round) + " starts before round " + std::to_string(round) +
                               " committed" + where,
                           last);
        round = e.round;
        last = static_cast<long long>(e.seq);
        out.push_back(std::move(e));
    }
    if (out.empty()) throw LogError("empty event log", 0);
    return out;
}

std::vector<RunEvent> read_event_log(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LogError("cannot open event log " + path.string(), 0);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_event_log(ss.str());
}

EventSink::EventSink(std::ostream* out, std::uint64_t next_seq, bool wallclock)
    : out_(out), next_seq_(next_seq), wallclock_(wallclock) {}

const RunEvent& EventSink::emit(std::string kind, std::uint64_t round, json payload) {
    last_ = RunEvent{next_seq_, std::move(kind), round, std::move(payload),
                     wallclock_ ? wallclock_now() : "seq:" + std::to_string(next_seq_)};
    ++next_seq_;
    if (out_) {
        *out_ << event_to_line(last_) << '\n';
        out_->flush();
    }
    return last_;
}

// ---- optimizer ----------------------------------------------------------------

namespace {

json stats_json(const ArmStats& s) {
    return {{"arm_id", s.arm_id},
            {"sample_count", s.sample_count},
            {"label_sum", s.label_sum},
            {"success_sum", s.success_sum}};
}

// Keeps a failed judgement from aborting the round: it becomes an unhelpful label.
class DegradingJudge final : public Judge {
public:
    explicit DegradingJudge(Judge& inner) : inner_(inner) {}
    JudgeKind kind() const override { return inner_.kind(); }
    TrajectoryLabel judge(const Trajectory& t, const ArmId& arm, std::string_view tool) override {
        if (t.error) return {arm, t.instance_id, 0, inner_.kind(), "trajectory failed: " + *t.error};
        try {
            return inner_.judge(t, arm, tool);
        } catch (const ParseError& e) {
            return {arm, t.instance_id, 0, inner_.kind(), std::string("judge failed: ") + e.what()};
        }
    }

private:
    Judge& inner_;
};

RankMetric rank_metric_for(CreditMetric m) {
    return m == CreditMetric::helpfulness ? RankMetric::helpfulness_mean : RankMetric::success_rate_mean;
}

class Optimizer {
public:
    Optimizer(RunConfig config, std::ostream& events, std::uint64_t next_seq, const RunControl& control)
        : config_(std::move(config)),
          control_(control),
          sink_(&events, next_seq, control.wallclock_timestamps),
          call_log_(control.call_log),
          archive_(config_.theta) {
        if (!config_.world) config_.world = sim::calibrated_world();
        if (config_.design_set.empty())
            config_.design_set = sim::make_design_set(*config_.world, config_.design_set_size, config_.seed);
        config_.design_set_size = config_.design_set.size();
        config_.validate();

        std::shared_ptr<llm::ChatProvider> provider;
        std::chrono::milliseconds backoff{0};
        if (config_.provider.kind == "mock") {
            auto mock = std::make_shared<llm::MockChatProvider>();
            install_offline_responders(*mock, *config_.world, config_.seed);
            provider = mock;
        } else {
            auto pc = llm::ProviderConfig::from_environment();
            if (!config_.provider.base_url.empty()) pc.base_url = config_.provider.base_url;
            if (!config_.provider.model.empty()) pc.model = config_.provider.model;
            pc.credential_env = config_.provider.credential_env;
            pc.timeout = std::chrono::milliseconds(config_.provider.timeout_ms);
            pc.retry_budget = config_.provider.retry_budget;
            backoff = pc.backoff;
            provider = std::make_shared<llm::HttpChatProvider>(pc);
        }
        llm::GatewayOptions go;
        go.retry_budget = config_.provider.retry_budget;
        go.backoff = backoff;
        go.max_in_flight = config_.provider.max_in_flight;
        go.default_model = config_.provider.model;
        gateway_ = std::make_unique<llm::Gateway>(provider, go, &call_log_);

        if (config_.evaluation_backend == BackendKind::simulated) {
            backend_ = std::make_unique<sim::SimulatedBackend>(*config_.world, config_.seed);
        } else {
            backend_ = std::make_unique<ScaffoldBackend>(*gateway_);
        }
    }

    const RunConfig& config() const { return config_; }
    Archive& archive() { return archive_; }

    void start() {
        json cfg = config_;
        sink_.emit("run_start", 0, {{"config", cfg}});
    }

    void bootstrap() {
        archive_.set_round_cursor(0);
        for (std::uint64_t i = 0; i < config_.bootstrap_size; ++i) {
            const json payload{{"index", i}};
            auto spec = generate(0, "bootstrap", payload);
            if (!spec) continue;
            spec->origin = Origin::bootstrap;
            add_with_warmup(std::move(*spec), 0, "bootstrap", payload);
        }
        if (archive_.empty()) throw Error("bootstrap produced no sub-agents");
        json stats = json::array();
        for (const auto& s : archive_.stats_in_order()) stats.push_back(stats_json(s));
        sink_.emit("stats_update", 0, {{"stats", stats}});
    }

    void round(std::uint64_t t) {
        archive_.set_round_cursor(t);
        if (config_.expansion_enabled) expand(t);

        const auto stats = archive_.stats_in_order();
        const auto selection = select_top_k(stats, t, config_.team_size);
        sink_.emit("selection", t, selection);

        std::vector<SubAgentSpec> subset;
        std::map<ArmId, std::string> names;
        for (const auto& id : selection.chosen) subset.push_back(archive_.arm(id));
        for (const auto& a : archive_.arms()) names[a.arm_id] = a.name;

        OrchestratorPlan plan;
        json plan_payload;
        try {
            plan = build_orchestrator_plan(subset, config_.customized_orchestrator, gateway_.get(), &plans_);
        } catch (const ParseError& e) {
            plan = generic_plan(selection.chosen);
            plan_payload["fallback"] = e.what();
        }
        plan_payload["subset"] = plan.subset;
        plan_payload["customized"] = plan.customized;
        plan_payload["plan_text"] = plan.plan_text;
        sink_.emit("plan_built", t, plan_payload);

        RoundOptions ro;
        ro.parallelism = config_.parallelism;
        auto record = run_round(t, subset, plan, round_instances(t), *backend_, ro);
        std::size_t failed = 0;
        for (const auto& tr : record.trajectories) {
            json p{{"instance_id", tr.instance_id},
                   {"success", tr.success},
                   {"submitted", tr.submitted},
                   {"steps", tr.steps.size()},
                   {"invoked", tr.invoked_arms()}};
            if (tr.error) {
                p["error"] = *tr.error;
                ++failed;
            }
            sink_.emit("trajectory_done", t, std::move(p));
        }
        if (failed == record.trajectories.size())
            throw Error("round " + std::to_string(t) + ": every design instance failed; aborting the run");

        std::unique_ptr<Judge> inner;
        if (config_.credit_metric == CreditMetric::helpfulness) {
            if (config_.judge == JudgeChoice::oracle) {
                inner = std::make_unique<sim::OracleJudge>();
            } else {
                inner = std::make_unique<LlmJudge>(*gateway_, names);
            }
        }
        std::unique_ptr<DegradingJudge> judge;
        if (inner) judge = std::make_unique<DegradingJudge>(*inner);
        CreditOptions co;
        co.parallelism = config_.parallelism;
        co.names = names;
        record.credit = build_credit_report(record, config_.credit_metric, judge.get(), co);

        json labels = json::object();
        for (const auto& [arm, ls] : record.credit.per_arm_labels) {
            json row = json::array();
            for (const auto& l : ls) row.push_back(l.label);
            labels[arm] = row;
        }
        sink_.emit("credit_report", t,
                   {{"metric", to_string(config_.credit_metric)},
                    {"labels", labels},
                    {"scores", record.credit.per_arm_score}});

        std::vector<int> successes;
        for (const auto& tr : record.trajectories) successes.push_back(tr.success ? 1 : 0);
        json updated = json::array();
        for (const auto& id : selection.chosen) {
            std::vector<int> ls;
            for (const auto& l : record.credit.per_arm_labels.at(id)) ls.push_back(l.label);
            auto s = record_samples(archive_.stats(id), ls);
            s = record_successes(std::move(s), successes);
            archive_.update_stats(s);
            updated.push_back(stats_json(s));
        }
        sink_.emit("stats_update", t, {{"stats", updated}});
    }

    void finish() {
        const auto top = rank_arms(archive_, rank_metric_for(config_.credit_metric), config_.export_top_k);
        sink_.emit("run_end", config_.budget, {{"archive_size", archive_.size()}, {"top_k", top}});
    }

private:
    // A seeded random subset of the design set, kept in design-set order.
    std::vector<TaskInstance> round_instances(std::uint64_t t) const {
        const auto& all = config_.design_set;
        const std::size_t m = config_.instances_per_round;
        if (m == 0 || m >= all.size()) return all;
        std::vector<std::size_t> idx(all.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Rng rng(config_.seed, t, "instances");
        for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
        idx.resize(m);
        std::sort(idx.begin(), idx.end());
        std::vector<TaskInstance> out;
        out.reserve(m);
        for (auto i : idx) out.push_back(all[i]);
        return out;
    }

    std::optional<SubAgentSpec> generate(std::uint64_t t, const std::string& decision, json payload) {
        payload["decision"] = decision;
        try {
            return generate_subagent(make_generation_request(archive_, t), *gateway_);
        } catch (const TransportError&) {
            throw;
        } catch (const ProtocolError&) {
            throw;
        } catch (const Error& e) {
            payload["error"] = e.what();
            sink_.emit("expansion", t, std::move(payload));
            return std::nullopt;
        }
    }

    void add_with_warmup(SubAgentSpec spec, std::uint64_t t, const std::string& decision, json payload = {}) {
        if (payload.is_null()) payload = json::object();
        payload["decision"] = decision;
        payload["spec"] = spec;
        sink_.emit("expansion", t, std::move(payload));
        if (config_.warmup_rounds > 0) {
            WarmupOptions wo{config_.seed, t};
            const auto state =
                warmup_refine(spec, config_.design_set, config_.warmup_rounds, *backend_, *gateway_, wo);
            for (const auto& h : state.history) {
                json applied = json::object();
                if (h.applied.docstring) applied["docstring"] = *h.applied.docstring;
                if (h.applied.context_description) applied["context_description"] = *h.applied.context_description;
                if (h.applied.instance_template) applied["instance_template"] = *h.applied.instance_template;
                json p{{"arm_id", spec.arm_id},
                       {"index", h.index},
                       {"instance_id", h.instance_id},
                       {"applied", applied},
                       {"dropped", h.dropped}};
                if (h.skipped) p["skipped"] = *h.skipped;
                sink_.emit("warmup_update", t, std::move(p));
            }
            spec = state.spec;
        }
        archive_.add_arm(std::move(spec));
    }

    void expand(std::uint64_t t) {
        const double draw = Rng(config_.seed, t, "expansion").uniform();
        const double p = config_.theta / (config_.theta + static_cast<double>(archive_.size()));
        json payload{{"draw", draw}, {"probability", p}, {"archive_size", archive_.size()}};
        if (!crp_expansion_decision(config_.theta, archive_.size(), draw)) {
            payload["decision"] = "skip";
            sink_.emit("expansion", t, std::move(payload));
            return;
        }
        auto spec = generate(t, "add", payload);
        if (spec) add_with_warmup(std::move(*spec), t, "add", std::move(payload));
    }

    RunConfig config_;
    RunControl control_;
    EventSink sink_;
    llm::CallLog call_log_;
    Archive archive_;
    std::unique_ptr<llm::Gateway> gateway_;
    std::unique_ptr<EvaluationBackend> backend_;
    PlanCache plans_;
};

RunResult drive(Optimizer& opt, std::uint64_t first_round, const RunControl& control) {
    RunResult r;
    const auto budget = opt.config().budget;
    for (std::uint64_t t = first_round; t <= budget; ++t) {
        opt.round(t);
        r.rounds_completed = t;
        if (control.stop_after_round && t >= *control.stop_after_round && t < budget) {
            r.archive = opt.archive();
            return r;
        }
    }
    opt.finish();
    r.rounds_completed = budget;
    r.finished = true;
    r.archive = opt.archive();
    return r;
}

}  // namespace

RunResult run_optimize(const RunConfig& config, std::ostream& events, const RunControl& control) {
    config.validate();
    Optimizer opt(config, events, 1, control);
    opt.start();
    opt.bootstrap();
    if (control.stop_after_round && *control.stop_after_round == 0) return {opt.archive(), 0, false};
    return drive(opt, 1, control);
}

Archive replay_archive(const std::vector<RunEvent>& events) {
    if (events.empty() || events.front().kind != "run_start") throw LogError("log does not begin with run_start", 0);
    const auto config = config_from_json(events.front().payload.at("config"));
    Archive archive(config.theta);
    std::optional<SubAgentSpec> pending;
    auto commit = [&] {
        if (pending) archive.add_arm(std::move(*pending));
        pending.reset();
    };
    for (const auto& e : events) {
        try {
            archive.set_round_cursor(e.round);
            if (e.kind != "warmup_update") commit();
            if (e.kind == "expansion" && e.payload.contains("spec")) {
                pending = e.payload.at("spec").get<SubAgentSpec>();
            } else if (e.kind == "warmup_update") {
                if (!pending || pending->arm_id != e.payload.at("arm_id").get<std::string>())
                    throw LogError("warm-up update without a matching expansion", static_cast<long long>(e.seq) - 1);
                SpecUpdates u;
                const auto& a = e.payload.at("applied");
                if (a.contains("docstring")) u.docstring = a.at("docstring").get<std::string>();
                if (a.contains("context_description"))
                    u.context_description = a.at("context_description").get<std::string>();
                if (a.contains("instance_template")) u.instance_template = a.at("instance_template").get<std::string>();
                pending = apply_updates(std::move(*pending), u);
            } else if (e.kind == "stats_update") {
                for (const auto& s : e.payload.at("stats")) {
                    ArmStats st = archive.stats(s.at("arm_id").get<std::string>());
                    st.sample_count = s.at("sample_count").get<std::uint64_t>();
                    st.label_sum = s.at("label_sum").get<double>();
                    st.success_sum = s.at("success_sum").get<double>();
                    archive.update_stats(st);
                }
            }
        } catch (const json::exception& ex) {
            throw LogError(std::string("inconsistent event payload: ") + ex.what(), static_cast<long long>(e.seq) - 1);
        } catch (const ContractError& ex) {
            throw LogError(std::string("inconsistent event: ") + ex.what(), static_cast<long long>(e.seq) - 1);
        }
    }
    commit();
    return archive;
}

RunResult resume(const std::filesystem::path& log_path, const RunControl& control) {
    std::string text;
    {
        std::ifstream in(log_path, std::ios::binary);
        if (!in) throw LogError("cannot open event log " + log_path.string(), 0);
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    const auto events = parse_event_log(text);
    if (events.back().kind == "run_end") {
        RunResult r{replay_archive(events), events.back().round, true};
        return r;
    }

    // Cut back to the last committed round.
    std::size_t keep = 1;
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].kind == "stats_update") keep = i + 1;
    }
    std::size_t bytes = 0;
    for (std::size_t i = 0; i < keep; ++i) bytes = text.find('\n', bytes) + 1;
    const std::vector<RunEvent> kept(events.begin(), events.begin() + static_cast<std::ptrdiff_t>(keep));
    {
        std::ofstream out(log_path, std::ios::binary | std::ios::trunc);
        out.write(text.data(), static_cast<std::streamsize>(bytes));
        if (!out) throw Error("cannot rewrite event log " + log_path.string());
    }

    const auto config = config_from_json(events.front().payload.at("config"));
    std::ofstream out(log_path, std::ios::binary | std::ios::app);
    Optimizer opt(config, out, kept.back().seq + 1, control);
    if (keep == 1) {
        opt.bootstrap();
        return drive(opt, 1, control);
    }
    opt.archive() = replay_archive(kept);
    return drive(opt, kept.back().round + 1, control);
}

}  // namespace boad
