#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "exr/design.hpp"
#include "exr/errors.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace exr;
using testing::factorial_definition;

namespace {

std::vector<std::string> sorted_ids(const RunTable& t) {
    std::vector<std::string> ids;
    for (const auto& r : t.runs) ids.push_back(r.run_id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

}  // namespace

TEST_SUITE("design") {

TEST_CASE("run table sizes of the reference studies") {
    auto apps = factorial_definition(21, {}, 25);
    CHECK(count_runs(apps) == 525);
    CHECK(generate_run_table(apps).runs.size() == 525);

    auto runtimes = factorial_definition(3, {4, 2}, 10);
    const auto t = generate_run_table(runtimes);
    CHECK(t.runs.size() == 240);
    CHECK(t.trial_count() == 24);
}

TEST_CASE("fixed factors never multiply runs") {
    auto def = factorial_definition(2, {3}, 2);
    def.factors.push_back({"os", FactorKind::fixed, {{"linux", {}}}});
    CHECK(count_runs(def) == 12);
    CHECK(count_runs(def) == oracle::factorial_runs(def));
}

TEST_CASE("run ids and trial keys") {
    auto def = factorial_definition(1, {2}, 2);
    const auto t = cross_product(def);
    REQUIRE(t.runs.size() == 4);
    CHECK(t.runs[0].run_id == "r1_s1_t1");
    CHECK(t.runs[1].run_id == "r2_s1_t1");
    CHECK(t.runs[2].run_id == "r3_s1_t2");
    CHECK(t.runs[0].trial_key == "subject=s1|f1=t1");
    CHECK(t.runs[0].repetition == 1);
    CHECK(t.runs[1].repetition == 2);
    CHECK(t.runs[0].canonical_index == 0);
}

TEST_CASE("same seed gives the same order, different seeds usually differ") {
    auto def = factorial_definition(3, {4, 2}, 10, 42);
    const auto a = generate_run_table(def);
    const auto b = generate_run_table(def);
    CHECK(a.order_digest == b.order_digest);
    def.seed = 43;
    CHECK(generate_run_table(def).order_digest != a.order_digest);
    CHECK(a.order_digest == order_digest(a.runs));
}

TEST_CASE("shuffle is a permutation of the cross product") {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 50; ++i) {
        std::vector<std::size_t> levels(rng() % 3);
        for (auto& l : levels) l = 1 + rng() % 4;
        auto def = factorial_definition(1 + rng() % 3, levels, 1 + static_cast<std::int64_t>(rng() % 4), rng());
        CHECK(sorted_ids(generate_run_table(def)) == sorted_ids(cross_product(def)));
        CHECK(generate_run_table(def).runs.size() == oracle::factorial_runs(def));
    }
}

TEST_CASE("blocking keeps blocks contiguous in declared order") {
    auto def = factorial_definition(2, {3}, 3, 5);
    def.factors.push_back({"device", FactorKind::blocking, {{"phone", {}}, {"tablet", {}}}});
    const auto t = generate_run_table(def);
    REQUIRE(t.runs.size() == 36);
    for (std::size_t i = 0; i < 18; ++i) CHECK(t.runs[i].block == std::optional<std::string>("phone"));
    for (std::size_t i = 18; i < 36; ++i) CHECK(t.runs[i].block == std::optional<std::string>("tablet"));
    CHECK(t.runs[0].trial_key.find("device=phone") != std::string::npos);
}

TEST_CASE("run count overflow is detected") {
    auto def = factorial_definition(10, {100, 100}, 100);
    def.policy.max_runs = 1'000'000;
    CHECK_THROWS_AS(count_runs(def), OverflowError);
}

TEST_CASE("fractions") {
    CHECK(Fraction::parse("1/2") == Fraction{1, 2});
    CHECK(Fraction::parse("0.25") == Fraction{1, 4});
    CHECK(Fraction::parse("1") == Fraction{1, 1});
    CHECK_THROWS_AS(Fraction::parse("0"), DomainError);
    CHECK_THROWS_AS(Fraction::parse("3/2"), DomainError);
    CHECK_THROWS_AS(Fraction::parse("abc"), DomainError);

    auto def = factorial_definition(3, {4, 2}, 10, 8);
    const auto full = generate_run_table(def);
    const auto half = apply_fraction(full, Fraction{1, 2}, def.seed);
    const auto quarter = apply_fraction(full, Fraction{1, 4}, def.seed);
    CHECK(half.trial_count() == 12);
    CHECK(half.runs.size() == 120);
    CHECK(quarter.trial_count() == 6);
    std::set<std::string> half_trials;
    for (const auto& r : half.runs) half_trials.insert(r.trial_key);
    for (const auto& r : quarter.runs) CHECK(half_trials.count(r.trial_key) == 1);
    CHECK(apply_fraction(full, Fraction{1, 3}, def.seed).trial_count() == 8);
    CHECK(apply_fraction(full, Fraction{1, 5}, def.seed).trial_count() == 5);  // ceil(4.8)
}

TEST_CASE("duration estimate and feasibility") {
    CHECK(estimate_duration(240, Seconds{300}, Seconds{60}).count() == 86340.0);
    CHECK(check_feasibility(estimate_duration(240, Seconds{300}, Seconds{60})).ok);
    const auto big = estimate_duration(1000, Seconds{300}, Seconds{60});
    CHECK(big.count() == 359940.0);
    const auto v = check_feasibility(big);
    CHECK_FALSE(v.ok);
    CHECK(v.excess.count() == 359940.0 - 144000.0);
    CHECK(estimate_duration(1, Seconds{300}, Seconds{60}).count() == 300.0);
    CHECK(estimate_duration(0, Seconds{300}, Seconds{60}).count() == 0.0);
    CHECK_FALSE(check_feasibility(Seconds{144000}).ok);
    CHECK_THROWS_AS(estimate_duration(3, Seconds{-1}, Seconds{0}), DomainError);
}

}
