#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>

#include "boad/error.hpp"
#include "boad/runner.hpp"

namespace boad {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string fmt3(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 3);
    return std::string(buf, r.ptr);
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    return out;
}

}  // namespace

json export_top_k(const Archive& archive, std::size_t k, RankMetric metric, bool customized, llm::Gateway* planner) {
    if (k < 1) throw ContractError("export_top_k: k must be positive");
    const auto ids = rank_arms(archive, metric, k);
    if (ids.empty()) throw ContractError("export_top_k: the archive has no sampled arms");
    std::vector<SubAgentSpec> specs;
    json subagents = json::array();
    for (const auto& id : ids) {
        specs.push_back(archive.arm(id));
        const auto& s = archive.stats(id);
        json entry = archive.arm(id);
        entry["stats"] = {{"n", s.sample_count},
                          {"helpfulness", *s.mean()},
                          {"success_rate", *s.success_mean()}};
        subagents.push_back(std::move(entry));
    }
    const auto plan = build_orchestrator_plan(specs, customized && planner != nullptr, planner);
    return {{"version", 1},
            {"metric", to_string(metric)},
            {"k", k},
            {"subagents", subagents},
            {"orchestrator", {{"customized", plan.customized}, {"plan_text", plan.plan_text}}}};
}

ReportFiles write_report(const std::vector<RunEvent>& events, const std::filesystem::path& out_dir) {
    std::size_t committed = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].kind == "stats_update") committed = i + 1;
    }
    if (committed == 0) throw LogError("log has no committed round", static_cast<long long>(events.size()));
    const std::vector<RunEvent> prefix(events.begin(), events.begin() + static_cast<std::ptrdiff_t>(committed));
    const auto archive = replay_archive(prefix);
    const auto config = config_from_json(events.front().payload.at("config"));

    std::filesystem::create_directories(out_dir);
    ReportFiles files{out_dir / "arms.tsv", out_dir / "selection_counts.tsv", std::nullopt};

    {
        auto out = open_out(files.arms);
        out << "sub_agent\tgenerated_iteration\tn\thelpfulness\n";
        for (const auto& s : archive.stats_in_order()) {
            const auto m = s.mean();
            out << archive.arm(s.arm_id).name << '\t' << s.created_round << '\t' << s.sample_count << '\t'
                << (m ? fmt3(*m) : "NA") << '\n';
        }
    }

    std::map<ArmId, std::uint64_t> counts;
    std::vector<sim::RoundChoice> choices;
    for (const auto& e : prefix) {
        if (e.kind != "selection") continue;
        const auto sel = e.payload.get<SelectionResult>();
        sim::RoundChoice rc{e.round, sel.chosen, {}};
        for (const auto& [id, score] : sel.scores) rc.available.push_back(id);
        for (const auto& id : sel.chosen) ++counts[id];
        choices.push_back(std::move(rc));
    }
    {
        auto out = open_out(files.selection_counts);
        out << "sub_agent\tselected_rounds\n";
        for (const auto& a : archive.arms()) out << a.name << '\t' << counts[a.arm_id] << '\n';
    }

    if (config.evaluation_backend == BackendKind::simulated && config.world) {
        std::vector<sim::RegretPoint> curve;
        bool known = true;
        for (const auto& rc : choices) {
            for (const auto& id : rc.available) known = known && config.world->arms.contains(id);
        }
        if (known) {
            curve = sim::regret_curve(choices, *config.world, config.team_size);
            files.regret = out_dir / "regret.tsv";
            auto out = open_out(*files.regret);
            out << "round\tregret\n";
            for (const auto& p : curve) out << p.round << '\t' << fmt(p.regret) << '\n';
        }
    }
    return files;
}

// ---- bandit simulation --------------------------------------------------------

SimPolicy sim_policy_from_string(std::string_view s) {
    if (s == "ucb") return SimPolicy::ucb;
    if (s == "random") return SimPolicy::random;
    if (s == "greedy") return SimPolicy::greedy;
    throw ContractError("unknown policy: " + std::string(s));
}

namespace {

SubAgentSpec fixture_spec(const ArmId& id) {
    SubAgentSpec s;
    s.arm_id = id;
    s.name = id;
    s.docstring = "[subagent] Simulated arm " + id + ".";
    s.context_description = "What to work on.";
    s.instance_template = "Your task:\n{{context}}";
    s.system_template = "You are the " + id + " assistant.";
    s.origin = Origin::fixture;
    return s;
}

std::vector<ArmId> choose(const std::vector<ArmStats>& stats, std::uint64_t t, std::uint64_t k, SimPolicy policy,
                          std::uint64_t seed) {
    if (policy == SimPolicy::ucb) return select_top_k(stats, t, k).chosen;
    std::vector<std::size_t> order(stats.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const auto take = std::min<std::size_t>(k, order.size());
    if (policy == SimPolicy::random) {
        Rng rng(seed, t, "policy");
        for (std::size_t i = 0; i < take; ++i) std::swap(order[i], order[i + rng.below(order.size() - i)]);
    } else {
        auto value = [&](std::size_t i) {
            const auto m = stats[i].mean();
            return m ? *m : std::numeric_limits<double>::infinity();
        };
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (value(a) != value(b)) return value(a) > value(b);
            if (stats[a].created_round != stats[b].created_round) return stats[a].created_round < stats[b].created_round;
            return stats[a].arm_id < stats[b].arm_id;
        });
    }
    std::vector<ArmId> out;
    for (std::size_t i = 0; i < take; ++i) out.push_back(stats[order[i]].arm_id);
    return out;
}

}  // namespace

BanditSimResult simulate_bandit(const sim::WorldModel& world, const BanditSimOptions& o) {
    world.validate();
    if (o.rounds < 1 || o.k < 1 || o.instances_per_round < 1) throw ContractError("simulate_bandit: empty budget");
    BanditSimResult r;
    for (const auto& [id, skills] : world.arms) r.archive.add_arm(fixture_spec(id));
    std::vector<ArmId> all;
    for (const auto& a : r.archive.arms()) all.push_back(a.arm_id);
    const auto design = sim::make_design_set(world, o.instances_per_round, o.seed);
    std::vector<std::set<std::string>> required;
    for (const auto& inst : design) required.push_back(sim::required_roles(world, inst));

    for (std::uint64_t t = 1; t <= o.rounds; ++t) {
        r.archive.set_round_cursor(t);
        const auto chosen = choose(r.archive.stats_in_order(), t, o.k, o.policy, o.seed);
        std::map<ArmId, std::vector<int>> labels;
        std::vector<int> successes;
        for (std::size_t i = 0; i < design.size(); ++i) {
            Rng rng(o.seed, t, "trajectory", i);
            const auto traj = sim::simulate_trajectory(world, chosen, required[i], rng, design[i].max_steps,
                                                       design[i].instance_id);
            successes.push_back(traj.success ? 1 : 0);
            for (const auto& a : chosen)
                labels[a].push_back(o.metric == CreditMetric::helpfulness ? sim::oracle_judge(traj, a)
                                                                          : (traj.success ? 1 : 0));
        }
        for (const auto& a : chosen) {
            auto s = record_samples(r.archive.stats(a), labels[a]);
            r.archive.update_stats(record_successes(std::move(s), successes));
            ++r.selection_counts[a];
        }
        r.choices.push_back({t, chosen, all});
    }
    return r;
}

}  // namespace boad
