#include <cmath>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "boad/archive.hpp"
#include "boad/error.hpp"
#include "boad/rng.hpp"
#include "helpers.hpp"

using namespace boad;
using testing::spec;

TEST_CASE("crp expansion decision examples") {
    CHECK(crp_expansion_decision(1, 0, 0.999));
    CHECK(crp_expansion_decision(2, 8, 0.19));
    CHECK_FALSE(crp_expansion_decision(2, 8, 0.21));
    CHECK_FALSE(crp_expansion_decision(1, 1, 0.5));
    CHECK_THROWS_AS(crp_expansion_decision(0, 1, 0.5), ContractError);
}

TEST_CASE("crp acceptance frequency matches the probability") {
    Rng rng(12345);
    const double p = 2.0 / (2.0 + 5.0);
    const int n = 100000;
    int hits = 0;
    for (int i = 0; i < n; ++i) hits += crp_expansion_decision(2, 5, rng.uniform());
    const double sigma = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(hits / double(n) - p) < 3 * sigma);
}

TEST_CASE("crp growth is sublinear") {
    double first = 0, second = 0;
    for (std::uint64_t s = 0; s < 400; ++s) {
        const auto a = simulate_crp_growth(2, 3, 100, s);
        const auto b = simulate_crp_growth(2, 3, 200, s);  // same draws for rounds 1..100
        first += double(a);
        second += double(b - a);
    }
    CHECK(second < first);
}

TEST_CASE("add_arm examples") {
    Archive a(2.0, 5);
    a.add_arm(spec("x"));
    CHECK(a.size() == 1);
    CHECK(a.stats("x").sample_count == 0);
    CHECK(a.stats("x").created_round == 5);
    CHECK(a.arm("x").created_round == 5);

    auto b = add_arm(add_arm(add_arm(Archive{}, spec("a")), spec("b")), spec("c"));
    CHECK_THROWS_AS(b.add_arm(spec("b")), ContractError);
    CHECK(b.size() == 3);

    auto bad = spec("d");
    bad.docstring = "no prefix";
    CHECK_THROWS_AS(b.add_arm(bad), ContractError);
    bad = spec("d");
    bad.instance_template = "no placeholder";
    CHECK_THROWS_AS(b.add_arm(bad), ContractError);
}

TEST_CASE("rank_arms examples") {
    const auto ref = restore(testing::read_file(testing::fixture("reference_archive.json")));
    CHECK(ref.size() == 20);
    const auto top = rank_arms(ref, RankMetric::helpfulness_mean, 2);
    REQUIRE(top == std::vector<ArmId>{"issue_analyzer", "code_navigator"});
    CHECK(std::round(*ref.stats(top[0]).mean() * 1000) == 982);
    CHECK(std::round(*ref.stats(top[1]).mean() * 1000) == 933);

    Archive a;
    a.add_arm(spec("a"));
    a.add_arm(spec("b"));
    a.add_arm(spec("never"));
    a.update_stats(testing::stats("a", 4, 2));
    a.update_stats(testing::stats("b", 8, 4));
    CHECK(rank_arms(a, RankMetric::helpfulness_mean, 1) == std::vector<ArmId>{"b"});
    CHECK(rank_arms(a, RankMetric::helpfulness_mean, 5).size() == 2);  // unsampled arms are not ranked
    CHECK(rank_arms(Archive{}, RankMetric::helpfulness_mean, 3).empty());
}

TEST_CASE("snapshot round trip") {
    Archive a(2.5, 7);
    a.add_arm(spec("a", 1));
    a.add_arm(spec("b", 2));
    a.add_arm(spec("c", 3));
    auto s = testing::stats("b", 12, 5, 7);
    s.success_sum = 3;
    a.update_stats(s);
    const auto text = snapshot(a);
    const auto back = restore(text);
    CHECK(back == a);
    CHECK(snapshot(back) == text);
    CHECK(back.arms()[1].arm_id == "b");
}

TEST_CASE("restore rejects malformed snapshots") {
    CHECK_THROWS_AS(restore(""), SchemaError);
    CHECK_THROWS_AS(restore("{"), SchemaError);
    CHECK_THROWS_AS(restore("[]"), SchemaError);

    Archive a;
    a.add_arm(spec("a"));
    auto doc = nlohmann::json::parse(snapshot(a));
    auto v2 = doc;
    v2["version"] = 2;
    CHECK_THROWS_AS(restore(v2.dump()), SchemaError);
    auto extra = doc;
    extra["unexpected"] = 1;
    CHECK_THROWS_AS(restore(extra.dump()), SchemaError);
    auto orphan = doc;
    orphan["stats"].clear();
    CHECK_THROWS_AS(restore(orphan.dump()), SchemaError);
    auto overflow = doc;
    overflow["stats"][0]["label_sum"] = 5;
    CHECK_THROWS_AS(restore(overflow.dump()), SchemaError);
}

TEST_CASE("archive never changes creation stamps") {
    Archive a;
    a.add_arm(spec("a"));
    auto s = a.stats("a");
    s.created_round = 4;
    CHECK_THROWS_AS(a.update_stats(s), ContractError);
}
