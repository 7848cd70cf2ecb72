#include <doctest.h>

#include <sys/stat.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "exr/energy_counter.hpp"
#include "exr/errors.hpp"
#include "exr/profilers.hpp"
#include "fixtures.hpp"

using namespace exr;

namespace {

RunContext context(const std::string& run_id, const std::string& output_dir = {}) {
    RunContext ctx;
    ctx.run_id = run_id;
    ctx.subject = "s1";
    ctx.repetition = 2;
    ctx.treatments = {{"variant", "A"}, {"cpu-governor", "powersave"}};
    ctx.variables = {{"power", "10"}, {"run_id", run_id}};
    ctx.output_dir = output_dir;
    ctx.seed = 7;
    return ctx;
}

MetricSpec metric(const std::string& name, Aggregation agg) {
    return {name, {UnitKind::joule, {}}, agg, MetricRole::dependent};
}

}  // namespace

TEST_SUITE("profilers") {

TEST_CASE("measure sets and aggregation") {
    MeasureSet m;
    m.add(0.0, "e", 1.0);
    m.add(0.5, "e", 2.0);
    m.add(1.0, "e", 4.0);
    CHECK(aggregate(m, metric("e", Aggregation::sum)) == 7.0);
    CHECK(aggregate(m, metric("e", Aggregation::mean)) == doctest::Approx(7.0 / 3));
    CHECK(aggregate(m, metric("e", Aggregation::max)) == 4.0);
    CHECK(aggregate(m, metric("e", Aggregation::last)) == 4.0);
    CHECK_THROWS_AS(aggregate(m, metric("other", Aggregation::sum)), MissingMetricError);
    CHECK_THROWS_AS(m.add(0.9, "e", 1.0), ProfilerError);
    CHECK_THROWS_AS(m.add(2.0, "e", NAN), ProfilerError);
}

TEST_CASE("run environment") {
    const auto env = run_environment(context("r3_s1_A"), "before_run");
    CHECK(env.at("EXR_RUN_ID") == "r3_s1_A");
    CHECK(env.at("EXR_SUBJECT") == "s1");
    CHECK(env.at("EXR_REPETITION") == "2");
    CHECK(env.at("EXR_TREATMENT_VARIANT") == "A");
    CHECK(env.at("EXR_TREATMENT_CPU_GOVERNOR") == "powersave");
    CHECK(env.at("EXR_EVENT") == "before_run");
    CHECK(environment_name("cpu-governor") == "CPU_GOVERNOR");
}

TEST_CASE("registry") {
    const auto kinds = registered_profilers();
    for (const auto* k : {"synthetic", "rapl", "external", "process"})
        CHECK(std::find(kinds.begin(), kinds.end(), k) != kinds.end());
    CHECK_THROWS_AS(make_profiler({"teleporter", {}}), ProfilerError);
}

TEST_CASE("synthetic profiler is deterministic per run and seed") {
    auto p = make_profiler({"synthetic", {{"metric", "energy"}, {"power_w", "{power}"}, {"duration_s", "2"}, {"jitter", "0"}}});
    CHECK(p->declared_metrics() == std::vector<std::string>{"energy"});
    CHECK(p->ready().ready);
    const auto ctx = context("r1_s1_A");
    p->start(ctx);
    const auto m = p->stop(ctx);
    CHECK(aggregate(m, metric("energy", Aggregation::sum)) == doctest::Approx(20.0));

    auto q = make_profiler({"synthetic", {{"power_w", "5"}, {"jitter", "1"}, {"samples", "4"}}});
    const auto a = context("r1"), b = context("r2");
    q->start(a);
    const auto m1 = aggregate(q->stop(a), metric("energy", Aggregation::sum));
    q->start(a);
    const auto m2 = aggregate(q->stop(a), metric("energy", Aggregation::sum));
    q->start(b);
    const auto m3 = aggregate(q->stop(b), metric("energy", Aggregation::sum));
    CHECK(m1 == m2);
    CHECK(m1 != m3);
    q->start(a);
    CHECK(q->stop(a).values("energy").size() == 4);
}

TEST_CASE("rapl profiler reads a mock powercap domain across a wrap") {
    testing::TempDir dir;
    const auto domain = dir / "intel-rapl:0";
    write_mock_domain(domain, 900, 1000);
    auto p = make_profiler({"rapl", {{"domain", domain.string()}, {"metric", "energy"}, {"period_ms", "10"}}});
    CHECK(p->ready().ready);
    const auto ctx = context("r1");
    p->start(ctx);
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    write_mock_domain(domain, 100, 1000);
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    const auto m = p->stop(ctx);
    CHECK(aggregate(m, metric("energy", Aggregation::sum)) == doctest::Approx(0.0002));
}

TEST_CASE("rapl readiness fails on an unreadable counter") {
    testing::TempDir dir;
    const auto domain = dir / "d";
    write_mock_domain(domain, 5, 1000);
    ::chmod((domain / "energy_uj").c_str(), 0);
    auto p = make_profiler({"rapl", {{"domain", domain.string()}}});
    CHECK_FALSE(p->ready().ready);
    auto missing = make_profiler({"rapl", {{"domain", (dir / "nope").string()}}});
    CHECK_FALSE(missing->ready().ready);
}

TEST_CASE("external command profiler parses name,value lines") {
    testing::TempDir dir;
    auto p = make_profiler({"external",
                            {{"command", "echo watts,3.5; echo joules,12.5; echo noise; sleep 30"},
                             {"metrics", "energy,power"},
                             {"rename", "joules=energy,watts=power"},
                             {"stop_signal", "TERM"},
                             {"grace_s", "1"}}});
    CHECK(p->declared_metrics() == std::vector<std::string>{"energy", "power"});
    const auto ctx = context("r1", dir.path().string());
    p->start(ctx);
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    const auto m = p->stop(ctx);
    CHECK(aggregate(m, metric("energy", Aggregation::sum)) == 12.5);
    CHECK(aggregate(m, metric("power", Aggregation::mean)) == 3.5);
    CHECK(std::filesystem::exists(dir / "logs/r1.external.csv"));
}

TEST_CASE("external profiler settings are validated") {
    CHECK_THROWS_AS(make_profiler({"external", {{"metrics", "e"}}}), ProfilerError);
    CHECK_THROWS_AS(make_profiler({"external", {{"command", "x"}}}), ProfilerError);
    CHECK_THROWS_AS(make_profiler({"external", {{"command", "x"}, {"metrics", "e"}, {"rename", "bad"}}}), ProfilerError);
    CHECK_FALSE(make_profiler({"external", {{"command", "/no/such/meter"}, {"metrics", "e"}}})->ready().ready);
}

TEST_CASE("process profiler samples cpu of the subject") {
    auto p = make_profiler({"process", {{"metric", "cpu"}, {"memory_metric", "rss"}, {"period_ms", "20"}}});
    const auto ctx = context("r1");
    p->start(ctx);
    ProcessSpec spec;
    spec.argv = shell_command("i=0; while [ $i -lt 30000 ]; do i=$((i+1)); done");
    const auto result = run_process(spec, std::nullopt, [&](pid_t pid) { p->on_subject_started(pid); });
    p->on_subject_exited(result);
    const auto m = p->stop(ctx);
    CHECK(m.has("cpu"));
    CHECK(m.has("rss"));
    for (double v : m.values("cpu")) CHECK(v >= 0.0);
}

TEST_CASE("make_profilers rejects metrics missing from the definition") {
    ExperimentDefinition def;
    def.metrics.push_back(metric("energy", Aggregation::sum));
    def.profilers.push_back({"synthetic", {{"metric", "power"}}});
    CHECK_THROWS_AS(make_profilers(def), ReferenceError);
    def.profilers[0].settings["metric"] = "energy";
    CHECK(make_profilers(def).size() == 1);
}

}
