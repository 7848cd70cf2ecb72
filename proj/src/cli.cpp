#include "exr/cli.hpp"

#include <sys/stat.h>

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "exr/analysis.hpp"
#include "exr/design.hpp"
#include "exr/errors.hpp"
#include "exr/journal.hpp"
#include "exr/model.hpp"
#include "exr/orchestrator.hpp"
#include "exr/profilers.hpp"
#include "exr/status.hpp"

namespace exr {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* journal_file = "journal.ndjson";

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path output_dir_of(const fs::path& target) {
    if (fs::is_regular_file(target)) return load_definition(target).output_dir;
    return target;
}

// Loads a definition and prints its validation findings. Returns nullopt on errors.
std::optional<ExperimentDefinition> load_valid(const fs::path& config, CommandIo io) {
    auto def = load_definition(config);
    const auto report = validate(def);
    for (const auto& f : report.findings)
        (f.severity == Severity::error ? io.err : io.out)
            << (f.severity == Severity::error ? "error: " : "warning: ") << f.message << "\n";
    if (report.has_errors()) {
        io.err << config.string() << ": " << report.errors().size() << " validation error(s)\n";
        return std::nullopt;
    }
    return def;
}

struct PlanFile {
    std::uint64_t seed = 0;
    std::string fraction = "1";
    std::string order_digest;
};

std::optional<PlanFile> read_plan(const fs::path& dir) {
    const auto path = dir / "plan.json";
    if (!fs::exists(path)) return std::nullopt;
    try {
        const auto j = json::parse(read_file(path));
        PlanFile p;
        p.seed = j.at("seed").get<std::uint64_t>();
        p.fraction = j.at("fraction").get<std::string>();
        p.order_digest = j.at("order_digest").get<std::string>();
        return p;
    } catch (const json::exception& e) {
        throw Error("plan.json is malformed: " + std::string(e.what()));
    }
}

void write_plan(const fs::path& dir, const ExperimentDefinition& def, const RunTable& table, const Fraction& fraction,
                Seconds estimate, const FeasibilityVerdict& verdict) {
    const json j{{"seed", def.seed},
                 {"fraction", fraction.str()},
                 {"order_digest", table.order_digest},
                 {"runs", table.runs.size()},
                 {"trials", table.trial_count()},
                 {"estimate_s", estimate.count()},
                 {"budget_s", def.policy.budget.count()},
                 {"feasible", verdict.ok},
                 {"created_at", utc_timestamp()}};
    write_file_atomic(dir / "plan.json", j.dump(2) + "\n");
}

RunTable build_table(const ExperimentDefinition& def, const Fraction& fraction) {
    auto table = generate_run_table(def);
    if (!(fraction == Fraction{})) table = apply_fraction(table, fraction, def.seed);
    return table;
}

void print_estimate(std::ostream& out, const ExperimentDefinition& def, const RunTable& table, Seconds estimate,
                    const FeasibilityVerdict& verdict) {
    out << table.runs.size() << " runs, " << table.trial_count() << " trials\n";
    out << "estimated duration: " << format_duration(estimate.count()) << " (" << format_number(estimate.count())
        << " s at " << format_number(def.estimated_run_time.count()) << " s/run + "
        << format_number(def.cooldown.count()) << " s cooldown)\n";
    const auto budget_h = format_number(def.policy.budget.count() / 3600.0);
    if (verdict.ok)
        out << "feasible: within the " << budget_h << " h budget\n";
    else
        out << "over budget: exceeds the " << budget_h << " h budget by " << format_duration(verdict.excess.count())
            << " (" << format_number(estimate.count() / 3600.0) << " h)\n";
}

// Dry runs keep configured synthetic profilers and fill every other
// dependent metric with a default synthetic one.
std::vector<std::unique_ptr<Profiler>> dry_run_profilers(const ExperimentDefinition& def) {
    std::vector<std::unique_ptr<Profiler>> out;
    std::set<std::string> covered;
    for (const auto& cfg : def.profilers) {
        if (cfg.name != "synthetic") continue;
        auto p = make_profiler(cfg);
        for (const auto& m : p->declared_metrics()) covered.insert(m);
        out.push_back(std::move(p));
    }
    for (const auto* m : def.dependent_metrics()) {
        if (covered.count(m->name)) continue;
        ProfilerConfig cfg;
        cfg.name = "synthetic";
        cfg.settings = {{"metric", m->name}, {"power_w", "1"}, {"duration_s", "1"}, {"jitter", "0.01"}};
        out.push_back(make_profiler(cfg));
    }
    return out;
}

struct Artifacts {
    ExperimentDefinition def;
    RunTable table;
};

Artifacts load_artifacts(const fs::path& target) {
    const auto dir = output_dir_of(target);
    const auto def_path = dir / "definition.json";
    const auto csv_path = dir / "run_table.csv";
    if (!fs::exists(def_path) || !fs::exists(csv_path))
        throw Error("no plan artifacts in " + dir.string() + " (run `exr plan` and `exr run` first)");
    Artifacts a{parse_definition(read_file(def_path)), parse_run_table_csv(read_file(csv_path))};
    // The journal is authoritative if the CSV lags behind it after a crash.
    for (const auto& [run_id, record] : load_completed(dir / journal_file)) {
        if (Run* run = a.table.find(run_id)) {
            run->status = record.status;
            run->measures = record.status == RunStatus::done ? record.measures : std::map<std::string, double>{};
        }
    }
    return a;
}

int report_error(CommandIo io, const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return exit_usage;
}

void write_hook_stub(const fs::path& path, const std::string& event) {
    std::ofstream out(path);
    out << "#!/bin/sh\n"
        << "# " << event << " hook. Available: EXR_EVENT, EXR_OUTPUT_DIR";
    if (event != "before_experiment" && event != "after_experiment")
        out << ", EXR_RUN_ID, EXR_SUBJECT, EXR_REPETITION, EXR_TREATMENT_<FACTOR>";
    out << ".\nexit 0\n";
    out.close();
    fs::permissions(path, fs::perms::owner_all | fs::perms::group_read | fs::perms::group_exec |
                              fs::perms::others_read | fs::perms::others_exec);
}

std::string readme_template(const std::string& name) {
    return "# " + name +
           "\n\n"
           "Replication package.\n\n"
           "## Layout\n\n"
           "- `experiment.json`: goal, questions, factors, subjects, metrics, hypotheses\n"
           "- `hooks/`: scripts run around the experiment and each run\n"
           "- `data/`: run table, journal and logs written by `exr run`\n"
           "- `analysis/`: analysis notes and extra scripts\n\n"
           "## Reproduce\n\n"
           "```sh\n"
           "exr plan experiment.json\n"
           "exr run experiment.json\n"
           "exr analyze data\n"
           "exr report data\n"
           "```\n\n"
           "Add at least one subject to `experiment.json` before planning.\n";
}

ordered_json config_template(const std::string& name) {
    ordered_json hooks;
    for (const auto* e : {"before_experiment", "before_run", "after_run", "after_experiment"})
        hooks[e] = std::string("hooks/") + e + ".sh";
    return {
        {"name", name},
        {"gqm",
         {{"goal", "Compare the energy consumption of the variants of the subjects"},
          {"questions", {"Does the variant affect energy consumption?"}},
          {"metrics", {"energy"}}}},
        {"factors",
         {{{"name", "variant"},
           {"kind", "main"},
           {"treatments",
            {{{"name", "A"}, {"params", {{"power", "10"}}}}, {{"name", "B"}, {"params", {{"power", "20"}}}}}}}}},
        {"subjects", json::array()},
        {"metrics", {{{"name", "energy"}, {"unit", "joule"}, {"aggregation", "sum"}, {"role", "dependent"}}}},
        {"hypotheses",
         {{{"id", "H1"},
           {"metric", "energy"},
           {"factor", "variant"},
           {"treatment_a", "A"},
           {"treatment_b", "B"},
           {"direction", "two_sided"},
           {"question", 1}}}},
        {"repetitions", 10},
        {"cooldown_s", 30},
        {"estimated_run_time_s", 60},
        {"mode", "automatic"},
        {"seed", 1},
        {"profilers",
         {{{"name", "synthetic"},
           {"settings", {{"metric", "energy"}, {"power_w", "{power}"}, {"duration_s", "1"}, {"jitter", "0.5"}}}}}},
        {"hooks", hooks},
        {"output_dir", "data"},
    };
}

}  // namespace

int cmd_init(const std::string& name, const fs::path& dir, CommandIo io) {
    try {
        if (fs::exists(dir) && (!fs::is_directory(dir) || !fs::is_empty(dir))) {
            io.err << "error: " << dir.string() << " exists and is not an empty directory\n";
            return exit_usage;
        }
        fs::create_directories(dir / "hooks");
        fs::create_directories(dir / "data");
        fs::create_directories(dir / "analysis");
        for (const auto* e : {"before_experiment", "before_run", "after_run", "after_experiment"})
            write_hook_stub(dir / "hooks" / (std::string(e) + ".sh"), e);
        write_file_atomic(dir / "experiment.json", config_template(name).dump(2) + "\n");
        write_file_atomic(dir / "README.md", readme_template(name));
        io.out << "created " << dir.string() << ": experiment.json, README.md, hooks/, data/, analysis/\n";
        return exit_ok;
    } catch (const std::exception& e) {
        return report_error(io, e);
    }
}

int cmd_plan(const PlanOptions& options, CommandIo io) {
    try {
        const auto def = load_valid(options.config, io);
        if (!def) return exit_usage;
        const auto fraction = Fraction::parse(options.fraction.value_or("1"));
        const auto table = build_table(*def, fraction);
        const auto estimate = estimate_duration(table, def->estimated_run_time, def->cooldown);
        const auto verdict = check_feasibility(estimate, def->policy.budget);
        print_estimate(io.out, *def, table, estimate, verdict);

        const fs::path dir = def->output_dir;
        if (!read_journal(dir / journal_file).records.empty()) {
            io.out << "journal exists in " << dir.string() << "; plan artifacts left untouched\n";
        } else {
            fs::create_directories(dir);
            write_file_atomic(dir / "run_table.csv", emit_run_table_csv(table, {}));
            write_file_atomic(dir / "definition.json", serialize_definition(*def));
            write_plan(dir, *def, table, fraction, estimate, verdict);
            ExperimentState state;
            state.total_runs = table.runs.size();
            state.mode = def->mode;
            auto snapshot = snapshot_of(state, *def);
            snapshot.message = "planned";
            write_status(dir, snapshot);
            io.out << "run table written to " << (dir / "run_table.csv").string() << "\n";
        }
        return verdict.ok ? exit_ok : exit_infeasible;
    } catch (const std::exception& e) {
        return report_error(io, e);
    }
}

int cmd_run(const RunOptions& options, CommandIo io) {
    std::optional<ExperimentDefinition> def;
    try {
        def = load_valid(options.config, io);
        if (!def) return exit_usage;
        const fs::path dir = def->output_dir;
        fs::create_directories(dir);
        const auto journal_path = dir / journal_file;

        const bool has_journal = !read_journal(journal_path).records.empty();
        if (has_journal && !options.resume && !options.force) {
            io.err << "error: " << journal_path.string()
                   << " already holds measurements; use --resume to continue or --force to start over\n";
            return exit_usage;
        }
        if (options.force && !options.resume) {
            fs::remove(journal_path);
            fs::remove(dir / "control");
        }

        const auto planned = read_plan(dir);
        std::string fraction_text = options.fraction.value_or(planned ? planned->fraction : "1");
        if (options.resume && planned && options.fraction &&
            !(Fraction::parse(*options.fraction) == Fraction::parse(planned->fraction))) {
            io.err << "error: --fraction " << *options.fraction << " differs from the planned fraction "
                   << planned->fraction << "\n";
            return exit_usage;
        }
        if (options.resume && planned) fraction_text = planned->fraction;
        const auto fraction = Fraction::parse(fraction_text);
        auto table = build_table(*def, fraction);
        if (options.resume && has_journal && planned && planned->order_digest != table.order_digest) {
            io.err << "error: the run order no longer matches plan.json; the definition or seed changed since the "
                      "experiment started\n";
            return exit_usage;
        }

        const auto estimate = estimate_duration(table, def->estimated_run_time, def->cooldown);
        const auto verdict = check_feasibility(estimate, def->policy.budget);
        if (!options.quiet) print_estimate(io.out, *def, table, estimate, verdict);

        auto profilers = options.dry_run ? dry_run_profilers(*def) : make_profilers(*def);

        write_file_atomic(dir / "definition.json", serialize_definition(*def));
        if (!(options.resume && planned)) write_plan(dir, *def, table, fraction, estimate, verdict);

        auto journal = Journal::open(journal_path);
        if (journal.recovered_torn_tail()) io.out << "journal: dropped a torn final record left by a crash\n";
        if (!journal.records().empty())
            io.out << "resuming: " << journal.completed().size() << " of " << table.runs.size()
                   << " runs already journaled\n";

        std::unique_ptr<ConsoleGate> console;
        ExecutionOptions exec;
        exec.dry_run = options.dry_run;
        exec.skip_cooldown = options.dry_run;
        exec.interrupts = options.interrupts;
        exec.gate = options.gate;
        if (!exec.gate && def->mode == Mode::semi_automatic) {
            console = std::make_unique<ConsoleGate>(dir, options.interrupts);
            exec.gate = console.get();
        }
        if (!options.quiet) {
            exec.on_run_finished = [&](const Run& run, const RunMeasures& m, const ExperimentState& s) {
                io.out << "[" << s.finished() << "/" << s.total_runs << "] " << run.run_id << " "
                       << (m.ok ? "done" : "FAILED");
                if (m.ok)
                    for (const auto& [k, v] : m.values) io.out << " " << k << "=" << format_number(v);
                else
                    io.out << " (" << m.error << ")";
                io.out << std::endl;
            };
        }

        Executor executor(*def, table, journal, profilers, exec);
        const auto result = executor.execute();

        if (result.diagnostics && !result.diagnostics->passed()) {
            io.err << "diagnostics failed:\n";
            for (const auto& c : result.diagnostics->checks)
                io.err << "  [" << (c.passed ? "ok" : "FAIL") << "] " << c.name << ": " << c.detail << "\n";
            return exit_diagnostics;
        }
        const auto& s = result.state;
        switch (s.phase) {
            case Phase::completed:
                io.out << "completed: " << s.completed_count << " done, " << s.failed_count << " failed\n";
                return exit_ok;
            case Phase::paused:
                io.out << result.message << "\n";
                return exit_paused;
            case Phase::aborted:
                io.err << (result.message.empty() ? "aborted" : result.message) << "\n";
                return exit_aborted;
            default:
                io.err << "stopped in phase " << to_string(s.phase) << "\n";
                return exit_aborted;
        }
    } catch (const StorageError& e) {
        io.err << "error: " << e.what() << "\n";
        return exit_aborted;
    } catch (const std::exception& e) {
        return report_error(io, e);
    }
}

int cmd_status(const fs::path& target, bool post_continue, CommandIo io) {
    try {
        const auto dir = output_dir_of(target);
        auto status = read_status(dir);
        const auto completed = load_completed(dir / journal_file);
        if (!completed.empty()) {
            std::size_t done = 0, failed = 0;
            for (const auto& [id, r] : completed) (r.status == RunStatus::done ? done : failed)++;
            if (done + failed <= status.total) {
                status.done = done;
                status.failed = failed;
            }
        }
        io.out << format_status(status);
        if (post_continue) {
            post_control_request(dir, "continue");
            io.out << "continue request posted\n";
        }
        return exit_ok;
    } catch (const std::exception& e) {
        return report_error(io, e);
    }
}

int cmd_analyze(const fs::path& target, CommandIo io) {
    try {
        const auto a = load_artifacts(target);
        const auto report = analyze(a.def, a.table);
        const fs::path dir = output_dir_of(target);
        write_file_atomic(dir / "analysis.json", analysis_to_json(report));
        write_file_atomic(dir / "analysis.md", analysis_to_markdown(report));
        for (const auto& h : report.hypotheses)
            io.out << h.hypothesis.id << ": " << h.test.test_name << " p = " << format_number(h.test.p_value) << " -> "
                   << to_string(h.test.decision) << ", " << to_string(h.effect.method) << " = "
                   << format_number(h.effect.value) << " (" << to_string(h.effect.magnitude) << ")\n";
        for (const auto& f : report.flags) io.out << "flag: " << f << "\n";
        io.out << "analysis written to " << (dir / "analysis.json").string() << " and analysis.md\n";
        return exit_ok;
    } catch (const std::exception& e) {
        return report_error(io, e);
    }
}

int cmd_report(const fs::path& target, CommandIo io) {
    try {
        const auto a = load_artifacts(target);
        const auto report = analyze(a.def, a.table);
        const fs::path dir = output_dir_of(target);
        write_file_atomic(dir / "analysis.json", analysis_to_json(report));
        write_file_atomic(dir / "analysis.md", analysis_to_markdown(report));
        write_file_atomic(dir / "report.md", render_report(a.def, a.table, report));
        io.out << "report written to " << (dir / "report.md").string() << "\n";
        return exit_ok;
    } catch (const std::exception& e) {
        return report_error(io, e);
    }
}

int run_cli(int argc, const char* const* argv, CommandIo io, const std::atomic<int>* interrupts) {
    CLI::App app{"Plan, run and analyze energy and performance experiments", "exr"};
    app.require_subcommand(1);

    std::string init_name, init_dir;
    auto* init = app.add_subcommand("init", "Scaffold a replication package");
    init->add_option("name", init_name, "Experiment name")->required();
    init->add_option("dir", init_dir, "Target directory (default: the name)");

    PlanOptions plan_opts;
    std::string plan_fraction;
    auto* plan = app.add_subcommand("plan", "Generate the run table and estimate the duration");
    plan->add_option("config", plan_opts.config, "Experiment config")->required();
    auto* plan_fraction_opt = plan->add_option("--fraction", plan_fraction, "Keep this fraction of trials (e.g. 1/2)");

    RunOptions run_opts;
    std::string run_fraction;
    auto* run = app.add_subcommand("run", "Execute the experiment");
    run->add_option("config", run_opts.config, "Experiment config")->required();
    run->add_flag("--resume", run_opts.resume, "Continue from the journal");
    run->add_flag("--force", run_opts.force, "Discard an existing journal and start over");
    run->add_flag("--dry-run", run_opts.dry_run, "Skip subjects, use synthetic profilers, no cooldown");
    auto* run_fraction_opt = run->add_option("--fraction", run_fraction, "Keep this fraction of trials");
    run->add_flag("-q,--quiet", run_opts.quiet, "No per-run progress lines");

    std::string status_target;
    bool post_continue = false;
    auto* status = app.add_subcommand("status", "Show experiment progress");
    status->add_option("target", status_target, "Output directory or config")->required();
    status->add_flag("--continue", post_continue, "Let a waiting semi-automatic run proceed");

    std::string analyze_target;
    auto* analyze_cmd = app.add_subcommand("analyze", "Descriptive statistics and hypothesis tests");
    analyze_cmd->add_option("target", analyze_target, "Output directory or config")->required();

    std::string report_target;
    auto* report = app.add_subcommand("report", "Write report.md");
    report->add_option("target", report_target, "Output directory or config")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, io.out, io.err);
        return code == 0 ? exit_ok : exit_usage;
    }

    if (*init) return cmd_init(init_name, init_dir.empty() ? init_name : init_dir, io);
    if (*plan) {
        if (*plan_fraction_opt) plan_opts.fraction = plan_fraction;
        return cmd_plan(plan_opts, io);
    }
    if (*run) {
        if (*run_fraction_opt) run_opts.fraction = run_fraction;
        run_opts.interrupts = interrupts;
        return cmd_run(run_opts, io);
    }
    if (*status) return cmd_status(status_target, post_continue, io);
    if (*analyze_cmd) return cmd_analyze(analyze_target, io);
    if (*report) return cmd_report(report_target, io);
    return exit_usage;
}

}  // namespace exr
