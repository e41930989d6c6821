#include "boad/simenv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "boad/error.hpp"

namespace boad::sim {

using nlohmann::json;

namespace {

bool valid_probability(double p) { return p >= 0.0 && p <= 1.0; }

const SkillMap& empty_skills() {
    static const SkillMap empty;
    return empty;
}

}  // namespace

void WorldModel::validate() const {
    const std::set<std::string> role_set(roles.begin(), roles.end());
    if (role_set.size() != roles.size()) throw ContractError("world: duplicate roles");
    for (const auto& [arm, skills] : arms) {
        for (const auto& [role, p] : skills) {
            if (!role_set.contains(role)) throw ContractError("world: arm " + arm + " has unknown role " + role);
            if (!valid_probability(p)) throw ContractError("world: skill of " + arm + " out of [0,1]");
        }
    }
    for (const auto& [role, p] : baseline) {
        if (!role_set.contains(role)) throw ContractError("world: baseline has unknown role " + role);
        if (!valid_probability(p)) throw ContractError("world: baseline probability out of [0,1]");
    }
    if (tasks.empty()) throw ContractError("world: no tasks");
    for (const auto& t : tasks) {
        if (t.required.empty()) throw ContractError("world: task with no required roles");
        for (const auto& r : t.required) {
            if (!role_set.contains(r)) throw ContractError("world: task requires unknown role " + r);
        }
        if (!(t.weight > 0.0) || !std::isfinite(t.weight)) throw ContractError("world: task weight must be positive");
    }
}

const SkillMap& WorldModel::skills(const ArmId& arm) const {
    auto it = arms.find(arm);
    if (it == arms.end()) throw ContractError("world: unknown arm " + arm);
    return it->second;
}

double WorldModel::skill(const ArmId& arm, const std::string& role) const {
    const auto& s = skills(arm);
    auto it = s.find(role);
    return it == s.end() ? 0.0 : it->second;
}

void to_json(json& j, const WorldModel& w) {
    json arms = json::array();
    for (const auto& [id, skills] : w.arms) arms.push_back({{"arm_id", id}, {"skills", skills}});
    json tasks = json::array();
    for (const auto& t : w.tasks) tasks.push_back({{"required", t.required}, {"weight", t.weight}});
    j = {{"roles", w.roles}, {"arms", arms}, {"baseline", w.baseline}, {"tasks", tasks}};
}

void from_json(const json& j, WorldModel& w) {
    try {
        w.roles = j.at("roles").get<std::vector<std::string>>();
        w.arms.clear();
        for (const auto& a : j.at("arms")) {
            const auto id = a.at("arm_id").get<std::string>();
            if (!w.arms.emplace(id, a.at("skills").get<SkillMap>()).second)
                throw SchemaError("world: duplicate arm " + id);
        }
        w.baseline = j.value("baseline", SkillMap{});
        w.tasks.clear();
        for (const auto& t : j.at("tasks"))
            w.tasks.push_back({t.at("required").get<std::set<std::string>>(), t.value("weight", 1.0)});
    } catch (const json::exception& e) {
        throw SchemaError(std::string("world fixture: ") + e.what());
    }
    try {
        w.validate();
    } catch (const ContractError& e) {
        throw SchemaError(std::string("world fixture: ") + e.what());
    }
}

WorldModel load_world(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open world fixture " + path);
    try {
        return json::parse(in).get<WorldModel>();
    } catch (const json::parse_error& e) {
        throw SchemaError("world fixture " + path + ": " + e.what());
    }
}

WorldModel calibrated_world() {
    WorldModel w;
    w.roles = {"analyze", "localize", "reproduce", "edit", "test"};
    w.arms = {
        {"issue_analyzer", {{"analyze", 0.982}}},   {"code_navigator", {{"localize", 0.933}}},
        {"issue_reproducer", {{"reproduce", 0.768}}}, {"precision_editor", {{"edit", 0.642}}},
        {"test_runner", {{"test", 0.625}}},         {"data_flow_analyzer", {{"analyze", 0.562}}},
        {"code_detective", {{"localize", 0.500}}},  {"code_fixer", {{"edit", 0.361}}},
        {"fix_validator", {{"test", 0.333}}},       {"config_manager", {}},
    };
    for (const auto& r : w.roles) w.baseline[r] = 0.5;
    w.tasks = {{{"analyze", "localize", "reproduce", "edit", "test"}, 1.0}};
    return w;
}

WorldModel free_rider_world() {
    WorldModel w;
    w.roles = {"analyze", "localize"};
    w.arms = {{"issue_analyzer", {{"analyze", 0.9}}}, {"code_navigator", {{"localize", 0.9}}}, {"config_manager", {}}};
    w.baseline = {{"analyze", 0.6}, {"localize", 0.6}};
    w.tasks = {{{"analyze", "localize"}, 1.0}};
    return w;
}

Trajectory simulate_trajectory(const WorldModel& world, std::span<const ArmId> subset,
                               const std::set<std::string>& required, Rng& rng, std::uint32_t max_steps,
                               std::string instance_id) {
    for (const auto& a : subset) (void)world.skills(a);
    if (required.empty()) throw ContractError("simulate_trajectory: task has no required roles");
    if (max_steps < 1) throw ContractError("simulate_trajectory: max_steps must be >= 1");

    // draws[r][i] for arm i, draws[r][n] for the baseline
    const std::vector<std::string> roles(required.begin(), required.end());
    std::vector<std::vector<bool>> draws(roles.size(), std::vector<bool>(subset.size() + 1));
    for (std::size_t r = 0; r < roles.size(); ++r) {
        for (std::size_t i = 0; i < subset.size(); ++i) draws[r][i] = rng.bernoulli(world.skill(subset[i], roles[r]));
        const auto b = world.baseline.find(roles[r]);
        draws[r][subset.size()] = rng.bernoulli(b == world.baseline.end() ? 0.0 : b->second);
    }

    Trajectory t;
    t.instance_id = std::move(instance_id);
    t.subset.assign(subset.begin(), subset.end());
    GroundTruth gt;
    gt.required_roles = required;
    const std::size_t budget = max_steps - 1;  // last slot is the submission
    auto room = [&] { return t.steps.size() < budget; };
    auto outcome = [](bool ok, const std::string& role) {
        return ok ? "achieved " + role : "no progress on " + role;
    };

    if (room()) t.steps.push_back({std::string(kOrchestratorActor), "read the problem statement", "issue reviewed"});
    for (std::size_t i = 0; i < subset.size() && room(); ++i) {
        const auto& arm = subset[i];
        t.steps.push_back({std::string(kOrchestratorActor),
                           "<function=" + arm + ">\n<parameter=context>issue summary and findings so far</parameter>\n</function>",
                           "subagent " + arm + " returned"});
        const auto start = t.steps.size();
        for (std::size_t r = 0; r < roles.size() && room(); ++r) {
            t.steps.push_back({arm, "work on " + roles[r], outcome(draws[r][i], roles[r])});
            if (draws[r][i]) gt.achieved[arm].insert(roles[r]);
        }
        if (t.steps.size() > start) {
            t.segments.push_back({arm, start, t.steps.size() - start});
            gt.achieved.try_emplace(arm);
        }
    }
    for (std::size_t r = 0; r < roles.size() && room(); ++r) {
        const bool ok = draws[r][subset.size()];
        t.steps.push_back({std::string(kOrchestratorActor), "work on " + roles[r], outcome(ok, roles[r])});
        if (ok) gt.baseline_achieved.insert(roles[r]);
    }
    t.steps.push_back({std::string(kOrchestratorActor), "submit", "patch submitted"});
    t.submitted = true;

    bool covered = true;
    for (const auto& role : roles) {
        bool hit = gt.baseline_achieved.contains(role);
        for (const auto& [arm, got] : gt.achieved) hit = hit || got.contains(role);
        covered = covered && hit;
    }
    t.success = covered;
    t.ground_truth = std::move(gt);
    return t;
}

double true_team_success(const WorldModel& world, std::span<const ArmId> subset,
                         const std::set<std::string>& required) {
    double p = 1.0;
    for (const auto& role : required) {
        const auto b = world.baseline.find(role);
        double miss = 1.0 - (b == world.baseline.end() ? 0.0 : b->second);
        for (const auto& arm : subset) miss *= 1.0 - world.skill(arm, role);
        p *= 1.0 - miss;
    }
    for (const auto& arm : subset) (void)world.skills(arm);
    return p;
}

double expected_team_success(const WorldModel& world, std::span<const ArmId> subset) {
    double num = 0.0, den = 0.0;
    for (const auto& t : world.tasks) {
        num += t.weight * true_team_success(world, subset, t.required);
        den += t.weight;
    }
    return num / den;
}

double expected_contribution(const WorldModel& world, const ArmId& arm) {
    double num = 0.0, den = 0.0;
    for (const auto& t : world.tasks) {
        double miss = 1.0;
        for (const auto& role : t.required) miss *= 1.0 - world.skill(arm, role);
        num += t.weight * (1.0 - miss);
        den += t.weight;
    }
    return num / den;
}

int oracle_judge(const Trajectory& trajectory, const ArmId& arm) {
    if (!trajectory.in_subset(arm))
        throw ContractError("oracle_judge: arm " + arm + " not in subset of " + trajectory.instance_id);
    if (!trajectory.ground_truth) throw ContractError("oracle_judge: trajectory has no ground truth");
    const auto& gt = *trajectory.ground_truth;
    auto it = gt.achieved.find(arm);
    if (it == gt.achieved.end()) return 0;
    for (const auto& role : it->second) {
        if (gt.required_roles.contains(role)) return 1;
    }
    return 0;
}

TrajectoryLabel OracleJudge::judge(const Trajectory& trajectory, const ArmId& arm, std::string_view) {
    return {arm, trajectory.instance_id, oracle_judge(trajectory, arm), JudgeKind::oracle, std::nullopt};
}

namespace {

double binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    return c;
}

}  // namespace

BestSubset best_subset_oracle(const WorldModel& world, std::vector<ArmId> arms, std::size_t k, std::uint64_t cap) {
    std::sort(arms.begin(), arms.end());
    arms.erase(std::unique(arms.begin(), arms.end()), arms.end());
    if (arms.empty()) throw ContractError("best_subset_oracle: no arms");
    k = std::min(k, arms.size());
    if (k == 0) throw ContractError("best_subset_oracle: k must be positive");
    if (binomial(arms.size(), k) > static_cast<double>(cap))
        throw ContractError("best_subset_oracle: subset count exceeds the brute-force cap");

    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    BestSubset best;
    best.expected_success = -1.0;
    std::vector<ArmId> current(k);
    while (true) {
        for (std::size_t i = 0; i < k; ++i) current[i] = arms[idx[i]];
        const double v = expected_team_success(world, current);
        if (v > best.expected_success) {
            best.expected_success = v;
            best.subset = current;
        }
        // next combination in lexicographic order
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == arms.size() - k + (i - 1)) --i;
        if (i == 0) break;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
    return best;
}

std::vector<RegretPoint> regret_curve(std::span<const RoundChoice> rounds, const WorldModel& world, std::size_t k) {
    std::map<std::vector<ArmId>, double> best_cache;
    std::vector<RegretPoint> out;
    out.reserve(rounds.size());
    for (const auto& rc : rounds) {
        auto available = rc.available;
        std::sort(available.begin(), available.end());
        auto it = best_cache.find(available);
        if (it == best_cache.end())
            it = best_cache.emplace(available, best_subset_oracle(world, available, k).expected_success).first;
        auto chosen = rc.subset;
        std::sort(chosen.begin(), chosen.end());
        out.push_back({rc.round, it->second - expected_team_success(world, chosen)});
    }
    return out;
}

// ---- evolution --------------------------------------------------------------

Bundle evolutionary_baseline_step(const WorldModel& world, const Bundle& parent, Rng& mutation_rng,
                                  double mutation_scale) {
    if (parent.arms.empty()) throw ContractError("evolutionary_baseline_step: empty bundle");
    std::vector<ArmId> pool;
    for (const auto& [id, s] : world.arms) pool.push_back(id);

    Bundle next;
    next.iteration = parent.iteration + 1;
    for (std::size_t j = 0; j < parent.arms.size(); ++j) {
        const auto id = "evo" + std::to_string(next.iteration) + "_" + std::to_string(j + 1);
        SkillMap skills = parent.skills.at(parent.arms[j]);
        ArmId design = parent.design_of.contains(parent.arms[j]) ? parent.design_of.at(parent.arms[j]) : ArmId{};
        const auto h = parent.measured_helpfulness.find(parent.arms[j]);
        const double keep_p = h == parent.measured_helpfulness.end() ? 0.0 : h->second;
        if (!mutation_rng.bernoulli(keep_p)) {
            design = pool[mutation_rng.below(pool.size())];
            skills = world.arms.at(design);
        }
        for (auto& [role, p] : skills) {
            const double noise = mutation_scale > 0.0 ? mutation_scale * mutation_rng.normal() : 0.0;
            p = std::clamp(p + noise, 0.0, 1.0);
        }
        next.arms.push_back(id);
        next.skills[id] = std::move(skills);
        next.design_of[id] = design;
    }
    return next;
}

namespace {

void score_bundle(const WorldModel& world, Bundle& bundle, std::span<const TaskInstance> design_set,
                  std::uint64_t seed) {
    WorldModel w = world;
    for (const auto& [id, skills] : bundle.skills) w.arms[id] = skills;
    std::size_t wins = 0;
    std::map<ArmId, int> helpful;
    for (std::size_t i = 0; i < design_set.size(); ++i) {
        Rng rng(seed, bundle.iteration, "evolution/trajectory", i);
        const auto t = simulate_trajectory(w, bundle.arms, required_roles(world, design_set[i]), rng,
                                           design_set[i].max_steps, design_set[i].instance_id);
        wins += t.success ? 1 : 0;
        for (const auto& a : bundle.arms) helpful[a] += oracle_judge(t, a);
    }
    const auto n = static_cast<double>(design_set.size());
    bundle.measured_success = static_cast<double>(wins) / n;
    for (const auto& [a, h] : helpful) bundle.measured_helpfulness[a] = h / n;
}

}  // namespace

EvolutionResult run_evolution(const WorldModel& world, std::span<const TaskInstance> design_set,
                              std::size_t iterations, std::size_t k, std::uint64_t seed, double mutation_scale) {
    if (iterations == 0 || design_set.empty()) throw ContractError("run_evolution: empty budget");
    std::vector<ArmId> pool;
    for (const auto& [id, s] : world.arms) pool.push_back(id);
    k = std::min(k, pool.size());

    Bundle first;
    first.iteration = 1;
    Rng init(seed, 0, "evolution/init");
    for (std::size_t j = 0; j < k; ++j) {
        const auto pick = j + init.below(pool.size() - j);
        std::swap(pool[j], pool[pick]);
        const auto id = "evo1_" + std::to_string(j + 1);
        first.arms.push_back(id);
        first.skills[id] = world.arms.at(pool[j]);
        first.design_of[id] = pool[j];
    }

    EvolutionResult result;
    result.bundles.push_back(std::move(first));
    score_bundle(world, result.bundles.back(), design_set, seed);
    for (std::size_t it = 2; it <= iterations; ++it) {
        Rng mut(seed, it, "evolution/mutation");
        auto next = evolutionary_baseline_step(world, result.bundles.back(), mut, mutation_scale);
        score_bundle(world, next, design_set, seed);
        result.bundles.push_back(std::move(next));
        if (result.bundles.back().measured_success >= result.bundles[result.best_index].measured_success)
            result.best_index = result.bundles.size() - 1;
    }
    const auto& best = result.bundles[result.best_index];
    WorldModel w = world;
    for (const auto& [id, skills] : best.skills) w.arms[id] = skills;
    result.best_true_success = expected_team_success(w, best.arms);
    return result;
}

// ---- backend ----------------------------------------------------------------

std::vector<TaskInstance> make_design_set(const WorldModel& world, std::size_t n, std::uint64_t seed,
                                          std::uint32_t max_steps) {
    world.validate();
    double total = 0.0;
    for (const auto& t : world.tasks) total += t.weight;
    std::vector<TaskInstance> out;
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(seed, 0, "design_set", i);
        double u = rng.uniform() * total;
        std::size_t j = 0;
        while (j + 1 < world.tasks.size() && u >= world.tasks[j].weight) {
            u -= world.tasks[j].weight;
            ++j;
        }
        std::ostringstream id, text;
        id << "design-" << (i + 1 < 10 ? "0" : "") << (i + 1);
        text << "Synthetic issue " << (i + 1) << ": resolving it needs";
        for (const auto& r : world.tasks[j].required) text << ' ' << r;
        text << '.';
        out.push_back({id.str(), text.str(), "task:" + std::to_string(j), max_steps});
    }
    return out;
}

std::set<std::string> required_roles(const WorldModel& world, const TaskInstance& instance) {
    if (!instance.repo_ref.starts_with("task:"))
        throw ContractError("simulated backend: instance " + instance.instance_id + " has no task reference");
    const auto j = std::stoul(instance.repo_ref.substr(5));
    if (j >= world.tasks.size()) throw ContractError("simulated backend: task index out of range");
    return world.tasks[j].required;
}

SimulatedBackend::SimulatedBackend(WorldModel world, std::uint64_t seed) : world_(std::move(world)), seed_(seed) {
    world_.validate();
}

Trajectory SimulatedBackend::run(const OrchestratorPlan&, std::span<const SubAgentSpec> subset,
                                 const TaskInstance& instance, const EvalContext& ctx) {
    std::vector<ArmId> ids;
    for (const auto& s : subset) ids.push_back(s.arm_id);
    Rng rng(seed_, ctx.round, ctx.purpose, ctx.index);
    return simulate_trajectory(world_, ids, required_roles(world_, instance), rng, instance.max_steps,
                               instance.instance_id);
}

}  // namespace boad::sim
