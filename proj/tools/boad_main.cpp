// boad: optimize, rank, export, simulate and report.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "boad/error.hpp"
#include "boad/runner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw boad::Error("cannot open " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw boad::Error("cannot write " + p.string());
}

std::unique_ptr<boad::llm::Gateway> planner_for(const std::string& kind) {
    std::shared_ptr<boad::llm::ChatProvider> provider;
    if (kind == "mock") {
        auto mock = std::make_shared<boad::llm::MockChatProvider>();
        boad::install_offline_responders(*mock, boad::sim::calibrated_world(), 0);
        provider = mock;
    } else if (kind == "http") {
        provider = std::make_shared<boad::llm::HttpChatProvider>(boad::llm::ProviderConfig::from_environment());
    } else {
        throw boad::ContractError("unknown provider: " + kind);
    }
    return std::make_unique<boad::llm::Gateway>(provider);
}

struct OptimizeArgs {
    std::string config;
    std::string out = "runs/latest";
    std::optional<std::uint64_t> seed, budget, k;
    std::optional<double> theta;
    std::optional<std::string> backend, credit, resume, judge;
    bool no_expansion = false;
    bool no_custom = false;
    bool wallclock = false;
    std::optional<std::uint64_t> stop_after;
};

int cmd_optimize(const OptimizeArgs& a) {
    boad::RunControl control;
    control.stop_after_round = a.stop_after;
    control.wallclock_timestamps = a.wallclock;
    boad::RunResult result;
    fs::path dir;
    if (a.resume) {
        const fs::path log = *a.resume;
        dir = log.parent_path();
        std::ofstream calls(dir / "llm_calls.jsonl", std::ios::app);
        control.call_log = &calls;
        result = boad::resume(log, control);
    } else {
        boad::RunConfig config = a.config.empty() ? boad::RunConfig{} : boad::load_config(a.config);
        if (a.seed) config.seed = *a.seed;
        if (a.budget) config.budget = *a.budget;
        if (a.k) config.team_size = *a.k;
        if (a.theta) config.theta = *a.theta;
        if (a.backend) config.evaluation_backend = boad::backend_kind_from_string(*a.backend);
        if (a.credit) config.credit_metric = boad::credit_metric_from_string(*a.credit);
        if (a.judge) config.judge = *a.judge == "oracle" ? boad::JudgeChoice::oracle : boad::JudgeChoice::llm;
        if (a.no_expansion) config.expansion_enabled = false;
        if (a.no_custom) config.customized_orchestrator = false;
        config.validate();
        dir = a.out;
        fs::create_directories(dir);
        std::ofstream events(dir / "events.jsonl", std::ios::binary | std::ios::trunc);
        std::ofstream calls(dir / "llm_calls.jsonl", std::ios::trunc);
        control.call_log = &calls;
        result = boad::run_optimize(config, events, control);
    }
    write_file(dir / "archive.json", boad::snapshot(result.archive));
    std::cout << (result.finished ? "finished" : "stopped") << " after round " << result.rounds_completed << "; "
              << result.archive.size() << " arms; log " << (dir / "events.jsonl").string() << "\n";
    return 0;
}

int cmd_rank(const std::string& snapshot_path, const std::string& metric, std::size_t k) {
    const auto archive = boad::restore(read_file(snapshot_path));
    const auto m = boad::rank_metric_from_string(metric);
    std::cout << "rank\tsub_agent\tn\t" << boad::to_string(m) << "\n";
    std::size_t i = 0;
    for (const auto& id : boad::rank_arms(archive, m, k)) {
        const auto& s = archive.stats(id);
        const auto v = m == boad::RankMetric::helpfulness_mean ? s.mean() : s.success_mean();
        std::cout << ++i << '\t' << archive.arm(id).name << '\t' << s.sample_count << '\t' << *v << "\n";
    }
    return 0;
}

int cmd_export(const std::string& snapshot_path, std::size_t k, const std::string& metric, const std::string& out,
               bool no_custom, const std::string& provider) {
    const auto archive = boad::restore(read_file(snapshot_path));
    auto planner = no_custom ? nullptr : planner_for(provider);
    const auto bundle =
        boad::export_top_k(archive, k, boad::rank_metric_from_string(metric), !no_custom, planner.get());
    write_file(out, bundle.dump(2) + "\n");
    std::cout << "wrote " << bundle.at("subagents").size() << " sub-agents to " << out << "\n";
    return 0;
}

struct SimulateArgs {
    std::string world;
    std::string policy = "ucb";
    std::uint64_t rounds = 2000;
    std::uint64_t seeds = 1;
    std::uint64_t first_seed = 0;
    std::uint64_t k = 3;
    std::uint64_t instances = 1;
    std::string metric = "helpfulness";
    std::string out = "sim_out";
};

int cmd_simulate(const SimulateArgs& a) {
    const auto world = a.world.empty() ? boad::sim::calibrated_world() : boad::sim::load_world(a.world);
    fs::create_directories(a.out);
    if (a.policy == "evolution") {
        std::ofstream out(fs::path(a.out) / "evolution.tsv");
        out << "seed\titeration\tmeasured_success\ttrue_success\tbest\n";
        for (std::uint64_t s = a.first_seed; s < a.first_seed + a.seeds; ++s) {
            const auto design = boad::sim::make_design_set(world, a.instances, s);
            const auto r = boad::sim::run_evolution(world, design, a.rounds, a.k, s);
            for (std::size_t i = 0; i < r.bundles.size(); ++i) {
                auto w = world;
                for (const auto& [id, skills] : r.bundles[i].skills) w.arms[id] = skills;
                out << s << '\t' << r.bundles[i].iteration << '\t' << r.bundles[i].measured_success << '\t'
                    << boad::sim::expected_team_success(w, r.bundles[i].arms) << '\t' << (i == r.best_index)
                    << '\n';
            }
            std::cout << "seed " << s << ": best bundle true success " << r.best_true_success << "\n";
        }
        return 0;
    }
    boad::BanditSimOptions o;
    o.rounds = a.rounds;
    o.k = a.k;
    o.instances_per_round = a.instances;
    o.policy = boad::sim_policy_from_string(a.policy);
    o.metric = boad::credit_metric_from_string(a.metric);
    std::ofstream counts(fs::path(a.out) / "selection_counts.tsv");
    std::ofstream regret(fs::path(a.out) / "regret.tsv");
    counts << "seed\tsub_agent\tselected_rounds\ttrue_contribution\n";
    regret << "seed\tround\tregret\n";
    for (std::uint64_t s = a.first_seed; s < a.first_seed + a.seeds; ++s) {
        o.seed = s;
        const auto r = boad::simulate_bandit(world, o);
        for (const auto& [id, c] : r.selection_counts)
            counts << s << '\t' << id << '\t' << c << '\t' << boad::sim::expected_contribution(world, id) << '\n';
        double total = 0;
        for (const auto& p : boad::sim::regret_curve(r.choices, world, a.k)) {
            regret << s << '\t' << p.round << '\t' << p.regret << '\n';
            total += p.regret;
        }
        std::cout << "seed " << s << ": cumulative regret " << total << "\n";
    }
    return 0;
}

int cmd_report(const std::string& log, const std::string& out) {
    const auto files = boad::write_report(boad::read_event_log(log), out);
    std::cout << files.arms.string() << "\n" << files.selection_counts.string() << "\n";
    if (files.regret) std::cout << files.regret->string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bandit optimization of sub-agent teams"};
    app.require_subcommand(1);

    OptimizeArgs oa;
    auto* opt = app.add_subcommand("optimize", "Run the optimizer (or resume an interrupted run)");
    opt->add_option("--config", oa.config, "JSON run configuration")->check(CLI::ExistingFile);
    opt->add_option("--out", oa.out, "Output directory for events.jsonl, llm_calls.jsonl, archive.json");
    opt->add_option("--seed", oa.seed);
    opt->add_option("--budget", oa.budget, "Number of rounds B");
    opt->add_option("--k", oa.k, "Team size K");
    opt->add_option("--theta", oa.theta, "CRP concentration");
    opt->add_option("--backend", oa.backend)->check(CLI::IsMember({"simulated", "llm", "llm_scaffold"}));
    opt->add_option("--credit", oa.credit)->check(CLI::IsMember({"helpfulness", "success-rate", "success_rate"}));
    opt->add_option("--judge", oa.judge)->check(CLI::IsMember({"oracle", "llm"}));
    opt->add_flag("--no-expansion", oa.no_expansion);
    opt->add_flag("--no-custom-orchestrator", oa.no_custom);
    opt->add_option("--resume", oa.resume, "Event log of the run to continue")->check(CLI::ExistingFile);
    opt->add_option("--stop-after-round", oa.stop_after, "Stop after committing this round (resumable)");
    opt->add_flag("--wallclock", oa.wallclock, "Wall-clock timestamps (makes the log non-reproducible)");

    std::string snap, metric = "helpfulness";
    std::size_t rk = 2;
    auto* rank = app.add_subcommand("rank", "Rank archived sub-agents");
    rank->add_option("--snapshot", snap)->required()->check(CLI::ExistingFile);
    rank->add_option("--metric", metric);
    rank->add_option("--k", rk);

    std::string esnap, eout, emetric = "helpfulness", eprovider = "mock";
    std::size_t ek = 2;
    bool eno_custom = false;
    auto* exp = app.add_subcommand("export", "Write the top-k bundle with an orchestrator plan");
    exp->add_option("--snapshot", esnap)->required()->check(CLI::ExistingFile);
    exp->add_option("--k", ek);
    exp->add_option("--metric", emetric);
    exp->add_option("--out", eout)->required();
    exp->add_option("--provider", eprovider, "Planner provider (mock or http)")->check(CLI::IsMember({"mock", "http"}));
    exp->add_flag("--no-custom-orchestrator", eno_custom);

    SimulateArgs sa;
    auto* simc = app.add_subcommand("simulate", "Bandit or evolution runs on a simulated world");
    simc->add_option("--world", sa.world, "World fixture (default: calibrated world)")->check(CLI::ExistingFile);
    simc->add_option("--policy", sa.policy)->check(CLI::IsMember({"ucb", "random", "greedy", "evolution"}));
    simc->add_option("--rounds", sa.rounds);
    simc->add_option("--seeds", sa.seeds);
    simc->add_option("--first-seed", sa.first_seed);
    simc->add_option("--k", sa.k);
    simc->add_option("--instances", sa.instances, "Design instances per round");
    simc->add_option("--metric", sa.metric);
    simc->add_option("--out", sa.out);

    std::string rlog, rout = "report";
    auto* rep = app.add_subcommand("report", "Tables from an event log");
    rep->add_option("--log", rlog)->required()->check(CLI::ExistingFile);
    rep->add_option("--out", rout);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*opt) return cmd_optimize(oa);
        if (*rank) return cmd_rank(snap, metric, rk);
        if (*exp) return cmd_export(esnap, ek, emetric, eout, eno_custom, eprovider);
        if (*simc) return cmd_simulate(sa);
        if (*rep) return cmd_report(rlog, rout);
    } catch (const boad::LogError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
