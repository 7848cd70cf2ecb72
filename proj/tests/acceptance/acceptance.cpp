// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "exr/analysis.hpp"
#include "exr/cli.hpp"
#include "exr/design.hpp"
#include "exr/energy_counter.hpp"
#include "exr/errors.hpp"
#include "exr/journal.hpp"
#include "exr/process.hpp"
#include "exr/state_machine.hpp"
#include "exr/stats.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "reference_values.hpp"

using namespace exr;
using Clock = std::chrono::steady_clock;

namespace {

/// Collects failed expectations of one criterion.
struct Check {
    std::vector<std::string> failures;
    std::vector<std::string> notes;

    void expect(bool ok, const std::string& what) {
        if (!ok && failures.size() < 10) failures.push_back(what);
    }
};

std::string str(double v) {
    std::ostringstream out;
    out.precision(10);
    out << v;
    return out.str();
}

// 1: run table sizes

void run_table_sizes(Check& c) {
    const auto apps = testing::factorial_definition(21, {}, 25);
    const auto a = generate_run_table(apps);
    c.expect(a.runs.size() == 525, "21 x 25 gave " + std::to_string(a.runs.size()) + " runs");

    const auto runtimes = testing::factorial_definition(3, {4, 2}, 10);
    const auto t = generate_run_table(runtimes);
    c.expect(t.runs.size() == 240, "3 x (4x2) x 10 gave " + std::to_string(t.runs.size()) + " runs");
    std::set<std::string> keys;
    for (const auto& r : t.runs) keys.insert(r.trial_key);
    c.expect(keys.size() == 24, "distinct trial keys: " + std::to_string(keys.size()));
    c.expect(t.trial_count() == 24, "trial_count: " + std::to_string(t.trial_count()));
}

// 2: duration estimate

void duration_estimate(Check& c) {
    const auto e = estimate_duration(240, Seconds{300}, Seconds{60});
    c.expect(e.count() == 86340.0, "240 runs estimate " + str(e.count()));
    c.expect(check_feasibility(e, Seconds{40 * 3600.0}).ok, "240 runs judged infeasible");
    const auto big = estimate_duration(1000, Seconds{300}, Seconds{60});
    c.expect(!check_feasibility(big, Seconds{40 * 3600.0}).ok, "1000 runs judged feasible");
}

// 3: randomization determinism and completeness

using RunKey = std::tuple<std::string, std::vector<std::pair<std::string, std::string>>, std::int64_t>;

/// Nested loops over subjects, every factor's treatments and repetitions.
std::vector<RunKey> enumerate_cross_product(const ExperimentDefinition& def) {
    std::vector<std::vector<std::pair<std::string, std::string>>> combos{{}};
    for (const auto& f : def.factors) {
        std::vector<std::vector<std::pair<std::string, std::string>>> next;
        for (const auto& partial : combos)
            for (const auto& t : f.treatments) {
                auto extended = partial;
                extended.emplace_back(f.name, t.name);
                next.push_back(std::move(extended));
            }
        combos = std::move(next);
    }
    std::vector<RunKey> out;
    for (const auto& s : def.subjects)
        for (const auto& combo : combos)
            for (std::int64_t r = 1; r <= def.repetitions; ++r) out.emplace_back(s.name, combo, r);
    std::sort(out.begin(), out.end());
    return out;
}

void randomization(Check& c) {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 100; ++i) {
        std::vector<std::size_t> levels(rng() % 4);
        for (auto& l : levels) l = 1 + rng() % 4;
        const auto def = testing::factorial_definition(1 + rng() % 4, levels, 1 + static_cast<std::int64_t>(rng() % 5), rng());
        const auto first = generate_run_table(def);
        const auto second = generate_run_table(def);
        c.expect(first.order_digest == second.order_digest, "definition " + std::to_string(i) + ": digest differs");
        std::vector<RunKey> got;
        for (const auto& r : first.runs) got.emplace_back(r.subject, r.treatments, r.repetition);
        std::sort(got.begin(), got.end());
        c.expect(got == enumerate_cross_product(def), "definition " + std::to_string(i) + ": not the cross product");
    }
}

// 4: crash and resume through the command line tool

void crash_resume(Check& c) {
    for (int k = 1; k <= 11; ++k) {
        testing::TempDir dir("accept-resume");
        const auto out = dir / "out";
        const auto counter = dir / "count";
        auto cfg = nlohmann::json::parse(testing::golden_config(out.string()));
        const auto hook = dir / "before_run.sh";
        testing::write_script(hook, "n=$(cat " + counter.string() + " 2>/dev/null || echo 0)\nn=$((n+1))\necho $n > " +
                                        counter.string() + "\nif [ $n -eq " + std::to_string(k + 1) +
                                        " ]; then kill -9 $PPID; fi\n");
        cfg["hooks"] = {{"before_run", hook.string()}};
        const auto config = dir / "experiment.json";
        testing::write_text(config, cfg.dump(2));
        const std::string tag = "k=" + std::to_string(k) + ": ";

        ProcessSpec first;
        first.argv = {EXR_BINARY, "run", "-q", config.string()};
        first.stdout_path = dir / "first.log";
        const auto crashed = run_process(first, Seconds{60});
        c.expect(crashed.exit_status == 128 + 9, tag + "runner was not killed (status " + std::to_string(crashed.exit_status) + ")");
        const auto before = read_journal(out / "journal.ndjson").records.size();
        c.expect(before == static_cast<std::size_t>(k), tag + std::to_string(before) + " runs journaled before the crash");

        ProcessSpec resume;
        resume.argv = {EXR_BINARY, "run", "--resume", "-q", config.string()};
        resume.stdout_path = dir / "resume.log";
        const auto resumed = run_process(resume, Seconds{60});
        c.expect(resumed.exit_status == 0, tag + "resume exited " + std::to_string(resumed.exit_status));

        const auto records = read_journal(out / "journal.ndjson").records;
        c.expect(records.size() - before == static_cast<std::size_t>(12 - k),
                 tag + "resume executed " + std::to_string(records.size() - before) + " runs");
        std::set<std::string> ids;
        for (const auto& r : records) ids.insert(r.run_id);
        c.expect(ids.size() == records.size(), tag + "duplicate run_id in the journal");

        const auto table = parse_run_table_csv(testing::read_text(out / "run_table.csv"));
        std::set<std::string> csv_ids;
        std::size_t populated = 0;
        for (const auto& r : table.runs) {
            csv_ids.insert(r.run_id);
            populated += r.status == RunStatus::done && r.measures.count("energy") == 1;
        }
        c.expect(table.runs.size() == 12 && csv_ids.size() == 12, tag + "csv rows are not 12 unique runs");
        c.expect(populated == 12, tag + std::to_string(populated) + " populated csv rows");
    }
}

// 5: wrapping energy counter

void energy_counter(Check& c) {
    testing::TempDir dir("accept-rapl");
    const auto domain = dir / "intel-rapl:0";
    write_mock_domain(domain, 900, 1000);
    EnergyCounterSource source(domain);
    const auto start = source.read_raw();
    write_mock_domain(domain, 100, 1000);
    const auto end = source.read_raw();
    const double j = read_energy_delta(source, start, end);
    c.expect(std::abs(j - 0.0002) < 1e-15, "900 -> 100 over 1000 uJ gave " + str(j) + " J");

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::uint64_t range = 1 + rng() % 10'000'000;
        std::uint64_t raw = rng() % range;
        std::vector<std::uint64_t> increments(1 + rng() % 30);
        double sum = 0.0;
        for (auto& d : increments) {
            d = rng() % range;
            const std::uint64_t next = (raw + d) % range;
            sum += read_energy_delta(range, raw, next);
            raw = next;
        }
        const double truth = oracle::true_energy_j(increments);
        c.expect(std::abs(sum - truth) <= 1e-9 * std::max(1.0, truth),
                 "sequence " + std::to_string(trial) + ": " + str(sum) + " vs " + str(truth));
    }
}

// 6: statistics against brute force and frozen references

void statistics(Check& c) {
    // every multiset pair with sizes up to 5 over the values 1..6
    std::vector<std::vector<double>> samples;
    std::function<void(std::vector<double>&, double)> grow = [&](std::vector<double>& cur, double min) {
        if (!cur.empty()) samples.push_back(cur);
        if (cur.size() == 5) return;
        for (double v = min; v <= 6; ++v) {
            cur.push_back(v);
            grow(cur, v);
            cur.pop_back();
        }
    };
    std::vector<double> cur;
    grow(cur, 1);
    std::size_t compared = 0;
    for (const auto& a : samples)
        for (const auto& b : samples) {
            const double got = mann_whitney(a, b, Direction::two_sided).p_value;
            const double want = oracle::mann_whitney_p(a, b, Direction::two_sided);
            ++compared;
            c.expect(std::abs(got - want) < 1e-12, "mann-whitney p " + str(got) + " vs " + str(want));
        }
    c.expect(compared > 0, "no mann-whitney pairs enumerated");

    std::mt19937_64 rng(17);
    std::normal_distribution<double> normal(0, 3);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> a(1 + rng() % 20), b(1 + rng() % 20);
        for (auto& x : a) x = std::round(normal(rng));
        for (auto& x : b) x = std::round(normal(rng) + 1);
        const double got = cliffs_delta(a, b).value;
        const double want = oracle::cliffs_delta(a, b);
        c.expect(std::abs(got - want) < 1e-12, "cliff's delta " + str(got) + " vs " + str(want));
    }

    const auto& w = reference::welch_case();
    const auto two = welch_t(w.a, w.b);
    c.expect(std::abs(two.statistic - w.t) < 1e-3, "welch t " + str(two.statistic));
    c.expect(two.df && std::abs(*two.df - w.df) < 1e-3, "welch df");
    c.expect(std::abs(two.p_value - w.p_two) < 1e-3, "welch p " + str(two.p_value));
    c.expect(std::abs(welch_t(w.a, w.b, Direction::a_less).p_value - w.p_less) < 1e-3, "welch p (less)");
    c.expect(std::abs(welch_t(w.a, w.b, Direction::a_greater).p_value - w.p_greater) < 1e-3, "welch p (greater)");

    for (const auto& s : reference::shapiro_cases()) {
        const auto r = shapiro_wilk(s.x);
        c.expect(std::abs(r.w - s.w) < 1e-3, "shapiro W " + str(r.w) + " vs " + str(s.w));
        c.expect(std::abs(r.p_value - s.p) < 1e-3, "shapiro p " + str(r.p_value) + " vs " + str(s.p));
    }

    const auto& sp = reference::spearman_case();
    const auto rho = spearman(sp.x, sp.y);
    c.expect(std::abs(rho.rho - sp.rho) < 1e-3, "spearman rho " + str(rho.rho));
    c.expect(std::abs(rho.p_value - sp.p) < 1e-3, "spearman p " + str(rho.p_value));
}

// 7: command line flow on a synthetic experiment

std::string decision_of(const std::filesystem::path& out) {
    const auto j = nlohmann::json::parse(testing::read_text(out / "analysis.json"));
    return j.at("hypotheses").at(0).at("test").at("decision").get<std::string>();
}

void end_to_end(Check& c) {
    testing::TempDir dir("accept-e2e");
    std::ostringstream sink;
    CommandIo io{sink, sink};
    const auto pkg = dir / "study";
    c.expect(cmd_init("study", pkg, io) == exit_ok, "init failed");
    const auto config = pkg / "experiment.json";
    testing::write_text(config, testing::golden_config((pkg / "data").string(), 3, "10", "20", 7, 0.5));
    c.expect(cmd_plan({config, {}}, io) == exit_ok, "plan failed");
    RunOptions ro;
    ro.config = config;
    ro.dry_run = true;
    ro.quiet = true;
    c.expect(cmd_run(ro, io) == exit_ok, "dry run failed");
    c.expect(cmd_analyze(config, io) == exit_ok, "analyze failed");
    c.expect(cmd_report(config, io) == exit_ok, "report failed");
    c.expect(std::filesystem::exists(pkg / "data/report.md"), "no report.md");
    if (std::filesystem::exists(pkg / "data/analysis.json")) {
        const auto j = nlohmann::json::parse(testing::read_text(pkg / "data/analysis.json"));
        const auto& h = j.at("hypotheses").at(0);
        c.expect(h.at("test").at("decision") == "reject", "A=10 J vs B=20 J was not rejected");
        c.expect(std::abs(h.at("cliffs_delta").at("value").get<double>()) == 1.0, "|cliff's delta| != 1");
        c.expect(h.at("cliffs_delta").at("magnitude") == "large", "effect is not large");
    }

    int fail_to_reject = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        testing::TempDir rep("accept-null");
        const auto cfg = rep / "experiment.json";
        testing::write_text(cfg, testing::golden_config((rep / "out").string(), 3, "10", "10", seed, 0.5));
        RunOptions null_run;
        null_run.config = cfg;
        null_run.dry_run = true;
        null_run.quiet = true;
        if (cmd_run(null_run, io) != exit_ok || cmd_analyze(cfg, io) != exit_ok) {
            c.expect(false, "seed " + std::to_string(seed) + ": run or analyze failed");
            continue;
        }
        fail_to_reject += decision_of(rep / "out") == "fail_to_reject";
    }
    c.expect(fail_to_reject >= 90, "A=B failed to reject in only " + std::to_string(fail_to_reject) + " of 100");
    c.notes.push_back("A=B: fail to reject in " + std::to_string(fail_to_reject) + " of 100 seeds");
}

// 8: lifecycle state machine

std::string key(const ExperimentState& s) {
    std::ostringstream out;
    out << to_string(s.phase) << '|' << s.completed_count << '|' << s.failed_count << '|'
        << (s.current_run ? *s.current_run : "-") << '|' << (s.resumes_to ? to_string(*s.resumes_to) : "-");
    return out.str();
}

void state_machine(Check& c) {
    for (auto mode : {Mode::automatic, Mode::semi_automatic})
        for (auto p : all_phases)
            for (auto e : all_events) {
                ExperimentState s;
                s.phase = p;
                s.mode = mode;
                s.total_runs = 3;
                if (p == Phase::paused) s.resumes_to = Phase::running;
                try {
                    transition(s, {e, "r1"});
                } catch (const IllegalTransition&) {
                    // defined rejection
                } catch (const std::exception& ex) {
                    c.expect(false, std::string("undefined outcome for ") + std::string(to_string(p)) + " x " +
                                        std::string(to_string(e)) + ": " + ex.what());
                }
            }
    for (auto p : all_phases) {
        if (!is_active(p)) continue;
        ExperimentState s;
        s.phase = p;
        s.total_runs = 3;
        if (p == Phase::paused) s.resumes_to = Phase::running;
        bool any = false;
        for (auto e : all_events) {
            try {
                transition(s, {e, "r1"});
                any = true;
            } catch (const IllegalTransition&) {
            }
        }
        c.expect(any, std::string("active phase ") + std::string(to_string(p)) + " has no outgoing transition");
    }

    for (auto mode : {Mode::automatic, Mode::semi_automatic}) {
        ExperimentState start;
        start.mode = mode;
        start.total_runs = 3;
        std::vector<ExperimentState> frontier{start};
        std::set<std::string> seen{key(start)};
        std::set<Phase> reached;
        while (!frontier.empty()) {
            const auto s = frontier.back();
            frontier.pop_back();
            reached.insert(s.phase);
            for (auto e : all_events) {
                ExperimentState next;
                try {
                    next = transition(s, {e, "r" + std::to_string(s.finished() + 1)});
                } catch (const IllegalTransition&) {
                    continue;
                }
                if (seen.insert(key(next)).second) frontier.push_back(next);
            }
        }
        const std::string label = mode == Mode::automatic ? "automatic" : "semi-automatic";
        c.expect(reached.count(Phase::completed) == 1, label + ": completed unreachable from not_started");
        if (mode == Mode::automatic)
            c.expect(reached.count(Phase::waiting_operator) == 0, "automatic mode reaches waiting_operator");
        else
            c.expect(reached.count(Phase::waiting_operator) == 1, "semi-automatic mode never waits for the operator");
    }
}

struct Criterion {
    int number;
    std::string name;
    double limit_s;
    void (*body)(Check&);
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "run table sizes", 1.0, run_table_sizes},
        {2, "duration estimate and budget", 1.0, duration_estimate},
        {3, "deterministic complete randomization", 10.0, randomization},
        {4, "crash and resume", 120.0, crash_resume},
        {5, "wrapping energy counter", 5.0, energy_counter},
        {6, "statistics against references", 30.0, statistics},
        {7, "end-to-end synthetic experiment", 60.0, end_to_end},
        {8, "lifecycle state machine", 1.0, state_machine},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        Check check;
        const auto t0 = Clock::now();
        try {
            cr.body(check);
        } catch (const std::exception& e) {
            check.expect(false, std::string("exception: ") + e.what());
        }
        const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
        check.expect(elapsed < cr.limit_s, "took " + str(elapsed) + " s, limit " + str(cr.limit_s) + " s");
        const bool ok = check.failures.empty();
        failed += !ok;
        std::cout << "criterion " << cr.number << ": " << (ok ? "PASS" : "FAIL") << "  " << cr.name << " ("
                  << str(std::round(elapsed * 1000) / 1000) << " s)\n";
        for (const auto& n : check.notes) std::cout << "  " << n << "\n";
        for (const auto& f : check.failures) std::cout << "  - " << f << "\n";
        std::cout.flush();
    }
    return failed == 0 ? 0 : 1;
}
