#include <doctest.h>

#include <sys/stat.h>

#include <atomic>
#include <deque>
#include <set>
#include <sstream>

#include "exr/energy_counter.hpp"
#include "exr/orchestrator.hpp"
#include "exr/status.hpp"
#include "fixtures.hpp"

using namespace exr;

namespace {

struct Rig {
    testing::TempDir dir{"orch"};
    ExperimentDefinition def;
    RunTable table;
    std::optional<Journal> journal;
    std::vector<std::unique_ptr<Profiler>> profilers;

    explicit Rig(int reps = 2) {
        def = parse_definition(testing::golden_config((dir / "out").string(), reps));
    }

    ExperimentResult run(ExecutionOptions options = {}) {
        table = generate_run_table(def);
        std::filesystem::create_directories(def.output_dir);
        journal.emplace(Journal::open(std::filesystem::path(def.output_dir) / "journal.ndjson"));
        profilers = make_profilers(def);
        options.skip_cooldown = true;
        Executor ex(def, table, *journal, profilers, options);
        return ex.execute();
    }
};

class ScriptedGate final : public OperatorGate {
public:
    explicit ScriptedGate(std::deque<OperatorCommand> script) : script_(std::move(script)) {}
    OperatorCommand wait(const ExperimentState& state, std::string_view) override {
        seen.push_back(state.phase);
        if (script_.empty()) return OperatorCommand::proceed;
        auto c = script_.front();
        script_.pop_front();
        return c;
    }
    std::vector<Phase> seen;

private:
    std::deque<OperatorCommand> script_;
};

}  // namespace

TEST_SUITE("orchestrator") {

TEST_CASE("automatic run completes every run once") {
    Rig rig;
    std::vector<std::string> events;
    ExecutionOptions o;
    o.on_event = [&](const LifecycleEvent& e, const ExperimentState&) { events.emplace_back(to_string(e.kind)); };
    const auto result = rig.run(o);
    CHECK(result.state.phase == Phase::completed);
    CHECK(result.state.completed_count == 8);
    CHECK(result.executed.size() == 8);
    std::set<std::string> ids;
    for (const auto& r : rig.journal->records()) ids.insert(r.run_id);
    CHECK(ids.size() == 8);
    for (const auto& m : result.executed) {
        CHECK(m.ok);
        CHECK(m.values.at("energy") > 0.0);
    }
    CHECK(events.front() == "before_experiment");
    CHECK(events.back() == "after_experiment");
    CHECK(std::count(events.begin(), events.end(), "after_run") == 8);
    CHECK(read_status(rig.def.output_dir).done == 8);
    CHECK(std::filesystem::exists(std::filesystem::path(rig.def.output_dir) / "run_table.csv"));
}

TEST_CASE("a second execute skips journaled runs") {
    Rig rig;
    rig.run();
    auto table = generate_run_table(rig.def);
    ExecutionOptions opts;
    opts.skip_cooldown = true;
    Executor again(rig.def, table, *rig.journal, rig.profilers, opts);
    const auto r = again.execute();
    CHECK(r.executed.empty());
    CHECK(r.state.phase == Phase::completed);
    CHECK(rig.journal->records().size() == 8);
}

TEST_CASE("hooks see the run environment in order") {
    Rig rig(1);
    const auto log = rig.dir / "hook.log";
    for (const auto& event : hook_event_names()) {
        const auto script = rig.dir / ("hooks/" + event + ".sh");
        testing::write_script(script, "echo \"$EXR_EVENT ${EXR_RUN_ID:-none} ${EXR_TREATMENT_VARIANT:-}\" >> " + log.string() + "\n");
        rig.def.hooks[event] = script.string();
    }
    CHECK(rig.run().state.phase == Phase::completed);
    std::istringstream in(testing::read_text(log));
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    REQUIRE(lines.size() == 2 + 4 * 5);
    CHECK(lines.front() == "before_experiment none ");
    CHECK(lines.back() == "after_experiment none ");
    CHECK(lines[1].rfind("before_run r", 0) == 0);
    CHECK(lines[5].rfind("after_run r", 0) == 0);
    const auto first = rig.table.runs.front();
    CHECK(lines[1] == "before_run " + first.run_id + " " + first.treatment("variant"));
}

TEST_CASE("diagnostics fail on a missing or non-executable hook") {
    Rig rig;
    rig.def.hooks["before_run"] = (rig.dir / "missing.sh").string();
    auto result = rig.run();
    CHECK(result.state.phase == Phase::aborted);
    REQUIRE(result.diagnostics.has_value());
    CHECK_FALSE(result.diagnostics->find("hook:before_run")->passed);
    CHECK(result.executed.empty());

    testing::write_text(rig.dir / "plain.sh", "#!/bin/sh\n");
    std::filesystem::permissions(rig.dir / "plain.sh", std::filesystem::perms::owner_read | std::filesystem::perms::owner_write);
    rig.def.hooks["before_run"] = (rig.dir / "plain.sh").string();
    auto profilers = make_profilers(rig.def);
    CHECK_FALSE(diagnostic_check(rig.def, profilers).passed());
}

TEST_CASE("diagnostics fail on an unreadable energy counter") {
    Rig rig;
    const auto domain = rig.dir / "rapl";
    write_mock_domain(domain, 10, 1000);
    ::chmod((domain / "energy_uj").c_str(), 0);
    rig.def.profilers = {{"rapl", {{"domain", domain.string()}, {"metric", "energy"}}}};
    auto profilers = make_profilers(rig.def);
    const auto report = diagnostic_check(rig.def, profilers);
    CHECK_FALSE(report.passed());
    CHECK_FALSE(report.find("profiler:energy")->passed);
}

TEST_CASE("diagnostics flag a dependent metric no profiler produces") {
    Rig rig;
    rig.def.metrics.push_back({"power", {UnitKind::watt, {}}, Aggregation::mean, MetricRole::dependent});
    auto profilers = make_profilers(rig.def);
    const auto report = diagnostic_check(rig.def, profilers);
    CHECK_FALSE(report.passed());
    CHECK_FALSE(report.find("metric:power")->passed);
}

TEST_CASE("failing subjects are retried and then hit the failure cap") {
    Rig rig(5);
    rig.def.subjects[0].command_template = "echo attempt >> " + (rig.dir / "attempts").string() + "; exit 1";
    rig.def.policy.max_retries = 2;
    rig.def.policy.max_failed_fraction = 0.1;
    const auto result = rig.run();
    CHECK(result.state.phase == Phase::aborted);
    CHECK(result.state.failed_count == 3);
    for (const auto& m : result.executed)
        if (!m.ok) CHECK(m.attempts == 3);
    // 3 failed runs, 3 attempts each
    std::istringstream in(testing::read_text(rig.dir / "attempts"));
    int n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    CHECK(n == 9);
}

TEST_CASE("a subject that fails once then succeeds counts as done") {
    Rig rig(1);
    const auto marker = (rig.dir / "seen").string();
    rig.def.subjects = {{"s1", "if [ -f " + marker + "_{run_id} ]; then exit 0; fi; touch " + marker + "_{run_id}; exit 1", ".", Seconds{10}}};
    const auto result = rig.run();
    CHECK(result.state.phase == Phase::completed);
    CHECK(result.state.failed_count == 0);
    for (const auto& m : result.executed) CHECK(m.attempts == 2);
}

TEST_CASE("subject timeouts fail the run") {
    Rig rig(1);
    rig.def.subjects = {{"s1", "sleep 5", ".", Seconds{0.1}}};
    rig.def.policy.max_retries = 0;
    rig.def.policy.max_failed_fraction = 1.0;
    const auto result = rig.run();
    CHECK(result.state.phase == Phase::completed);
    CHECK(result.state.failed_count == 2);
    CHECK(result.executed[0].error.find("timed out") != std::string::npos);
}

TEST_CASE("semi-automatic mode asks the operator before each later run") {
    Rig rig(1);
    rig.def.mode = Mode::semi_automatic;
    ScriptedGate gate({OperatorCommand::proceed, OperatorCommand::pause, OperatorCommand::proceed});
    ExecutionOptions o;
    o.gate = &gate;
    const auto result = rig.run(o);
    CHECK(result.state.phase == Phase::completed);
    CHECK(result.state.completed_count == 4);
    CHECK(gate.seen == std::vector<Phase>{Phase::waiting_operator, Phase::waiting_operator, Phase::paused,
                                          Phase::waiting_operator, Phase::waiting_operator});
}

TEST_CASE("operator abort stops before the next run") {
    Rig rig(1);
    rig.def.mode = Mode::semi_automatic;
    ScriptedGate gate({OperatorCommand::abort});
    ExecutionOptions o;
    o.gate = &gate;
    const auto result = rig.run(o);
    CHECK(result.state.phase == Phase::aborted);
    CHECK(result.state.completed_count == 1);
    CHECK(rig.journal->records().size() == 1);
}

TEST_CASE("one interrupt pauses between runs") {
    Rig rig;
    std::atomic<int> interrupts{0};
    ExecutionOptions o;
    o.interrupts = &interrupts;
    o.on_run_finished = [&](const Run&, const RunMeasures&, const ExperimentState& s) {
        if (s.finished() == 3) interrupts = 1;
    };
    const auto result = rig.run(o);
    CHECK(result.state.phase == Phase::paused);
    CHECK(rig.journal->records().size() == 3);
    CHECK(read_status(rig.def.output_dir).phase == Phase::paused);
}

TEST_CASE("run context exposes parameters and built-ins") {
    Rig rig;
    const auto table = generate_run_table(rig.def);
    const auto ctx = make_run_context(rig.def, table.runs[0]);
    CHECK(ctx.variables.at("run_id") == table.runs[0].run_id);
    CHECK(ctx.variables.at("subject") == table.runs[0].subject);
    CHECK(ctx.variables.count("power") == 1);
    CHECK(ctx.seed == 7);
}

TEST_CASE("status snapshot and control channel") {
    testing::TempDir dir;
    ExperimentState s;
    s.phase = Phase::running;
    s.total_runs = 10;
    s.completed_count = 4;
    s.failed_count = 1;
    ExperimentDefinition def;
    def.name = "x";
    def.estimated_run_time = Seconds{10};
    def.cooldown = Seconds{2};
    auto snap = snapshot_of(s, def);
    CHECK(snap.pending() == 5);
    CHECK(snap.eta_seconds() == 60.0);
    write_status(dir.path(), snap);
    const auto back = read_status(dir.path());
    CHECK(back.done == 4);
    CHECK(back.failed == 1);
    CHECK(back.phase == Phase::running);
    CHECK(format_status(back).find("pending: 5") != std::string::npos);

    CHECK_FALSE(take_control_request(dir.path()).has_value());
    post_control_request(dir.path(), "continue");
    CHECK(take_control_request(dir.path()) == std::optional<std::string>("continue"));
    CHECK_FALSE(take_control_request(dir.path()).has_value());
}

}
