#include <algorithm>
#include <cmath>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "boad/error.hpp"
#include "boad/simenv.hpp"
#include "helpers.hpp"

using namespace boad;
using namespace boad::sim;

namespace {

WorldModel world(std::map<ArmId, SkillMap> arms, std::vector<std::string> roles, double baseline,
                 std::set<std::string> required) {
    WorldModel w;
    w.roles = roles;
    w.arms = std::move(arms);
    for (const auto& r : roles) w.baseline[r] = baseline;
    w.tasks.push_back({std::move(required), 1.0});
    w.validate();
    return w;
}

double monte_carlo(const WorldModel& w, const std::vector<ArmId>& team, const std::set<std::string>& required,
                   int draws, std::uint64_t seed) {
    int wins = 0;
    for (int i = 0; i < draws; ++i) {
        Rng rng(seed, 0, "mc", static_cast<std::uint64_t>(i));
        wins += simulate_trajectory(w, team, required, rng).success;
    }
    return wins / double(draws);
}

}  // namespace

TEST_CASE("certain and impossible teams") {
    const auto w = world({{"a", {{"edit", 1.0}}}, {"free", {}}}, {"edit"}, 0.0, {"edit"});
    for (std::uint64_t s = 0; s < 50; ++s) {
        Rng r1(s), r2(s);
        CHECK(simulate_trajectory(w, std::vector<ArmId>{"a"}, {"edit"}, r1).success);
        CHECK_FALSE(simulate_trajectory(w, std::vector<ArmId>{"free"}, {"edit"}, r2).success);
    }
}

TEST_CASE("closed form team success") {
    const auto one = world({{"a", {{"edit", 0.7}}}}, {"edit"}, 0.0, {"edit"});
    CHECK(true_team_success(one, std::vector<ArmId>{"a"}, {"edit"}) == doctest::Approx(0.7));
    const auto two = world({{"a", {{"edit", 0.5}}}, {"b", {{"edit", 0.5}}}}, {"edit"}, 0.0, {"edit"});
    CHECK(true_team_success(two, std::vector<ArmId>{"a", "b"}, {"edit"}) == doctest::Approx(0.75));
    const auto sure = world({{"a", {{"edit", 0.1}}}}, {"edit", "test"}, 1.0, {"edit", "test"});
    CHECK(true_team_success(sure, std::vector<ArmId>{"a"}, {"edit", "test"}) == 1.0);
}

TEST_CASE("monte carlo agrees with the closed form") {
    const int n = 100000;
    {
        const auto w = world({{"a", {{"edit", 0.9}}}, {"b", {{"localize", 0.8}}}}, {"edit", "localize"}, 0.0,
                             {"edit", "localize"});
        const std::vector<ArmId> team{"a", "b"};
        const double p = 0.9 * 0.8;
        CHECK(true_team_success(w, team, {"edit", "localize"}) == doctest::Approx(p));
        CHECK(std::abs(monte_carlo(w, team, {"edit", "localize"}, n, 1) - p) < 3 * std::sqrt(p * (1 - p) / n));
    }
    {
        const auto w = world({{"a", {{"edit", 0.5}}}, {"b", {{"edit", 0.5}}}}, {"edit"}, 0.0, {"edit"});
        const std::vector<ArmId> team{"a", "b"};
        CHECK(std::abs(monte_carlo(w, team, {"edit"}, n, 2) - 0.75) < 3 * std::sqrt(0.75 * 0.25 / n));
    }
    {
        const auto w = calibrated_world();
        const std::vector<ArmId> team{"issue_analyzer", "code_navigator", "issue_reproducer"};
        const auto req = w.tasks[0].required;
        const double p = true_team_success(w, team, req);
        CHECK(std::abs(monte_carlo(w, team, req, n, 3) - p) < 3 * std::sqrt(p * (1 - p) / n));
    }
}

TEST_CASE("trajectory structure and determinism") {
    const auto w = calibrated_world();
    const std::vector<ArmId> team{"issue_analyzer", "config_manager"};
    Rng a(9, 1, "trajectory", 0), b(9, 1, "trajectory", 0);
    const auto t1 = simulate_trajectory(w, team, w.tasks[0].required, a, 60, "x");
    const auto t2 = simulate_trajectory(w, team, w.tasks[0].required, b, 60, "x");
    CHECK(nlohmann::json(t1).dump() == nlohmann::json(t2).dump());
    t1.validate(60);
    CHECK(t1.submitted);
    CHECK(t1.ground_truth.has_value());
    CHECK(t1.invoked("issue_analyzer"));
    CHECK(t1.ground_truth->achieved.at("config_manager").empty());

    Rng c(9, 1, "trajectory", 0);
    const auto short_t = simulate_trajectory(w, team, w.tasks[0].required, c, 4, "x");
    CHECK(short_t.steps.size() <= 4);
    short_t.validate(4);
    CHECK(short_t.submitted);
}

TEST_CASE("oracle judge on simulated trajectories") {
    const auto w = world({{"a", {{"edit", 1.0}}}, {"b", {{"test", 1.0}}}, {"free", {}}}, {"edit", "test"}, 0.0,
                         {"edit"});
    Rng rng(1);
    const auto t = simulate_trajectory(w, std::vector<ArmId>{"a", "b", "free"}, {"edit"}, rng);
    CHECK(t.success);
    CHECK(oracle_judge(t, "a") == 1);
    CHECK(oracle_judge(t, "b") == 0);  // its role is not required
    CHECK(oracle_judge(t, "free") == 0);
    CHECK(expected_contribution(w, "a") == 1.0);
    CHECK(expected_contribution(w, "free") == 0.0);

    const auto fail = world({{"a", {{"edit", 1.0}}}}, {"edit", "test"}, 0.0, {"edit", "test"});
    Rng r2(1);
    const auto tf = simulate_trajectory(fail, std::vector<ArmId>{"a"}, {"edit", "test"}, r2);
    CHECK_FALSE(tf.success);
    CHECK(oracle_judge(tf, "a") == 1);
}

TEST_CASE("best subset oracle") {
    const auto w = world({{"a", {{"edit", 0.9}}}, {"b", {{"edit", 0.5}}}, {"c", {{"test", 0.8}}}}, {"edit", "test"},
                         0.1, {"edit", "test"});
    // pairs by hand: ab=(1-.1*.5*.9)*.1=0.0955, ac=.91*.82=0.7462, bc=.55*.82=0.451
    const auto best = best_subset_oracle(w, {"a", "b", "c"}, 2);
    CHECK(best.subset == std::vector<ArmId>{"a", "c"});
    CHECK(best.expected_success == doctest::Approx(0.91 * 0.82));
    CHECK(best_subset_oracle(w, {"c", "a", "b"}, 3).subset == std::vector<ArmId>{"a", "b", "c"});
    const auto same = world({{"x", {{"edit", .5}}}, {"y", {{"edit", .5}}}, {"z", {{"edit", .5}}}}, {"edit"}, 0, {"edit"});
    CHECK(best_subset_oracle(same, {"z", "y", "x"}, 2).subset == std::vector<ArmId>{"x", "y"});
    CHECK_THROWS_AS(best_subset_oracle(calibrated_world(), {"a"}, 2, 10), ContractError);
}

TEST_CASE("calibrated world has the expected best team") {
    const auto w = calibrated_world();
    std::vector<ArmId> all;
    for (const auto& [id, s] : w.arms) all.push_back(id);
    const auto best = best_subset_oracle(w, all, 3);
    CHECK(best.subset == std::vector<ArmId>{"code_navigator", "issue_analyzer", "issue_reproducer"});
    // independent check: product over roles of 1 - (1 - s)(1 - 0.5)
    const double expected = (1 - .018 * .5) * (1 - .067 * .5) * (1 - .232 * .5) * .5 * .5;
    CHECK(best.expected_success == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("world fixtures match the built-in worlds") {
    CHECK(load_world(testing::fixture("calibrated_world.json").string()) == calibrated_world());
    CHECK(load_world(testing::fixture("free_rider_world.json").string()) == free_rider_world());
    const nlohmann::json j = calibrated_world();
    CHECK(j.get<WorldModel>() == calibrated_world());
    auto bad = j;
    bad["arms"][0]["skills"]["edit"] = 1.5;
    CHECK_THROWS_AS(bad.get<WorldModel>(), SchemaError);
    CHECK_THROWS(load_world("/nonexistent/world.json"));
}

TEST_CASE("free-rider world") {
    const auto w = free_rider_world();
    const std::vector<ArmId> team{"issue_analyzer", "code_navigator", "config_manager"};
    CHECK(expected_team_success(w, team) > 0.4);
    CHECK(expected_contribution(w, "config_manager") == 0.0);
    CHECK(expected_contribution(w, "issue_analyzer") > 0.0);
}

TEST_CASE("regret curve") {
    const auto w = calibrated_world();
    std::vector<ArmId> all;
    for (const auto& [id, s] : w.arms) all.push_back(id);
    const auto best = best_subset_oracle(w, all, 3).subset;
    std::vector<RoundChoice> oracle, random;
    for (std::uint64_t t = 1; t <= 50; ++t) {
        oracle.push_back({t, best, all});
        Rng rng(t);
        auto pick = all;
        for (std::size_t i = 0; i < 3; ++i) std::swap(pick[i], pick[i + rng.below(pick.size() - i)]);
        pick.resize(3);
        random.push_back({t, pick, all});
    }
    for (const auto& p : regret_curve(oracle, w, 3)) CHECK(p.regret == 0.0);
    double total = 0;
    for (const auto& p : regret_curve(random, w, 3)) {
        CHECK(p.regret >= 0.0);
        total += p.regret;
    }
    CHECK(total > 0.0);
}

TEST_CASE("evolutionary step") {
    const auto w = calibrated_world();
    const auto design = make_design_set(w, 4, 1);
    const auto r = run_evolution(w, design, 3, 3, 5);
    REQUIRE(r.bundles.size() == 3);
    std::set<ArmId> seen;
    for (const auto& b : r.bundles) {
        CHECK(b.arms.size() == 3);
        for (const auto& a : b.arms) CHECK(seen.insert(a).second);  // ids never repeat
    }
    const auto again = run_evolution(w, design, 3, 3, 5);
    CHECK(again.best_index == r.best_index);
    CHECK(again.best_true_success == r.best_true_success);

    auto parent = r.bundles.back();
    for (const auto& a : parent.arms) parent.measured_helpfulness[a] = 1.0;  // every member is kept
    Rng rng(1);
    const auto kept = evolutionary_baseline_step(w, parent, rng, 0.0);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK_FALSE(seen.contains(kept.arms[j]));
        CHECK(kept.skills.at(kept.arms[j]) == parent.skills.at(parent.arms[j]));
    }
    for (const auto& a : parent.arms) parent.measured_helpfulness[a] = 0.0;  // every member is replaced
    const auto fresh = evolutionary_baseline_step(w, parent, rng, 0.0);
    for (const auto& id : fresh.arms) CHECK(fresh.skills.at(id) == w.skills(fresh.design_of.at(id)));
}

TEST_CASE("design set and simulated backend") {
    const auto w = calibrated_world();
    const auto d = make_design_set(w, 12, 4);
    CHECK(d.size() == 12);
    CHECK(d == make_design_set(w, 12, 4));
    CHECK(required_roles(w, d[0]) == w.tasks[0].required);
    SimulatedBackend backend(w, 4);
    std::vector<SubAgentSpec> subset{testing::spec("issue_analyzer"), testing::spec("unknown_arm")};
    CHECK_THROWS(backend.run(generic_plan({"issue_analyzer", "unknown_arm"}), subset, d[0], {}));
}
