#include "exr/orchestrator.hpp"

#include <poll.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <thread>

#include "exr/command_template.hpp"
#include "exr/errors.hpp"
#include "exr/process.hpp"
#include "exr/status.hpp"

namespace exr {
namespace {

constexpr Seconds hook_timeout{600.0};

bool is_executable_file(const std::filesystem::path& p) {
    struct stat st {};
    if (::stat(p.c_str(), &st) != 0 || !S_ISREG(st.st_mode)) return false;
    return (st.st_mode & (S_IXUSR | S_IXGRP | S_IXOTH)) != 0 && ::access(p.c_str(), X_OK) == 0;
}

std::string check_output_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) return "cannot create: " + ec.message();
    const auto probe = dir / ".exr-write-test";
    {
        std::ofstream out(probe);
        out << "ok\n";
        if (!out) return "not writable";
    }
    std::filesystem::remove(probe, ec);
    return {};
}

}  // namespace

bool DiagnosticsReport::passed() const noexcept {
    return std::all_of(checks.begin(), checks.end(), [](const CheckOutcome& c) { return c.passed; });
}

const CheckOutcome* DiagnosticsReport::find(std::string_view name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

RunContext make_run_context(const ExperimentDefinition& def, const Run& run) {
    RunContext ctx;
    ctx.run_id = run.run_id;
    ctx.subject = run.subject;
    ctx.repetition = run.repetition;
    ctx.treatments = run.treatments;
    ctx.output_dir = def.output_dir;
    ctx.seed = def.seed;
    for (const auto& f : def.factors) {
        const Treatment* t = nullptr;
        if (f.expands()) {
            t = f.find_treatment(run.treatment(f.name));
        } else if (!f.treatments.empty()) {
            t = &f.treatments.front();
        }
        if (t)
            for (const auto& [key, value] : t->parameters) ctx.variables[key] = value;
    }
    ctx.variables["run_id"] = run.run_id;
    ctx.variables["subject"] = run.subject;
    ctx.variables["repetition"] = std::to_string(run.repetition);
    ctx.variables["output_dir"] = def.output_dir;
    ctx.variables["seed"] = std::to_string(def.seed);
    return ctx;
}

DiagnosticsReport diagnostic_check(const ExperimentDefinition& def,
                                   const std::vector<std::unique_ptr<Profiler>>& profilers) {
    DiagnosticsReport report;
    const auto add = [&](std::string name, std::string failure, std::string ok_detail = "ok") {
        const bool passed = failure.empty();
        report.checks.push_back({std::move(name), passed, passed ? std::move(ok_detail) : std::move(failure)});
    };

    add("output_dir", check_output_dir(def.output_dir), def.output_dir);

    for (const auto& [event, path] : def.hooks) {
        std::string why;
        if (!std::filesystem::exists(path))
            why = "missing: " + path;
        else if (!is_executable_file(path))
            why = "not an executable file: " + path;
        add("hook:" + event, why, path);
    }

    std::vector<Run> sample_runs;
    try {
        if (count_runs(def) <= 100'000) sample_runs = cross_product(def).runs;
    } catch (const Error&) {
    }
    for (const auto& subject : def.subjects) {
        std::string why;
        if (!std::filesystem::is_directory(subject.working_dir)) why = "working directory missing: " + subject.working_dir;
        bool resolved = false;
        std::string last_error = "no trial for this subject";
        for (const auto& run : sample_runs) {
            if (run.subject != subject.name) continue;
            try {
                substitute(subject.command_template, make_run_context(def, run).variables);
                resolved = true;
                break;
            } catch (const ReferenceError& e) {
                last_error = e.what();
            }
        }
        if (why.empty() && !resolved) why = last_error;
        add("subject:" + subject.name, why, subject.command_template);
    }

    std::map<std::string, bool> produced;
    for (const auto& p : profilers) {
        const auto readiness = p->ready();
        for (const auto& metric : p->declared_metrics()) {
            produced[metric] = true;
            add("profiler:" + metric, readiness.ready ? "" : readiness.detail,
                std::string(p->kind()) + (readiness.detail.empty() ? "" : " " + readiness.detail));
        }
    }
    for (const auto* m : def.dependent_metrics())
        add("metric:" + m->name, produced.count(m->name) ? "" : "no profiler produces this dependent metric");

    return report;
}

ConsoleGate::ConsoleGate(std::filesystem::path output_dir, const std::atomic<int>* interrupts)
    : output_dir_(std::move(output_dir)), interrupts_(interrupts) {}

OperatorCommand ConsoleGate::wait(const ExperimentState&, std::string_view prompt) {
    std::cout << prompt << std::flush;
    bool stdin_open = true;
    std::string line;
    while (true) {
        if (interrupts_ && interrupts_->load() > 0) return OperatorCommand::pause;
        if (auto request = take_control_request(output_dir_)) {
            if (*request == "abort") return OperatorCommand::abort;
            if (*request == "pause") return OperatorCommand::pause;
            return OperatorCommand::proceed;
        }
        if (!stdin_open) {
            std::this_thread::sleep_for(std::chrono::milliseconds(200));
            continue;
        }
        pollfd pfd{STDIN_FILENO, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, 200);
        if (ready <= 0 || !(pfd.revents & (POLLIN | POLLHUP))) continue;
        char c = 0;
        const ssize_t n = ::read(STDIN_FILENO, &c, 1);
        if (n <= 0) {
            stdin_open = false;  // EOF: only the control file can continue now
            continue;
        }
        if (c != '\n') {
            line += c;
            continue;
        }
        const auto cmd = line;
        line.clear();
        if (cmd == "a" || cmd == "abort") return OperatorCommand::abort;
        if (cmd == "p" || cmd == "pause") return OperatorCommand::pause;
        return OperatorCommand::proceed;
    }
}

Executor::Executor(const ExperimentDefinition& def, RunTable& table, Journal& journal,
                   std::vector<std::unique_ptr<Profiler>>& profilers, ExecutionOptions options)
    : def_(def), table_(table), journal_(journal), profilers_(profilers), options_(std::move(options)) {
    state_.total_runs = table_.runs.size();
    state_.mode = def_.mode;
    state_.max_failed_fraction = def_.policy.max_failed_fraction;
}

int Executor::interrupts() const noexcept {
    return options_.interrupts ? options_.interrupts->load() : 0;
}

void Executor::persist(const std::string& message) {
    if (!options_.write_files) return;
    auto snapshot = snapshot_of(state_, def_);
    snapshot.message = message;
    write_status(def_.output_dir, snapshot);
}

void Executor::advance(EventKind kind, const std::string& run_id) {
    state_ = transition(state_, {kind, run_id});
    if (options_.on_event) options_.on_event({kind, run_id}, state_);
    persist();
}

void Executor::emit(EventKind kind, const std::string& run_id) {
    if (driving_) {
        advance(kind, run_id);
    } else if (options_.on_event) {
        options_.on_event({kind, run_id}, state_);
    }
}

std::string Executor::invoke_hook(std::string_view event, const RunContext* ctx) {
    const auto it = def_.hooks.find(std::string(event));
    if (it == def_.hooks.end()) return {};
    ProcessSpec spec;
    spec.argv = {it->second};
    if (ctx) {
        spec.extra_env = run_environment(*ctx, event);
    } else {
        spec.extra_env = {{"EXR_OUTPUT_DIR", def_.output_dir}, {"EXR_EVENT", std::string(event)}};
    }
    const auto logs = std::filesystem::path(def_.output_dir) / "logs";
    std::filesystem::create_directories(logs);
    spec.stdout_path = logs / "hooks.log";
    spec.stderr_path = spec.stdout_path;
    try {
        const auto result = run_process(spec, hook_timeout);
        if (result.timed_out) return "hook " + std::string(event) + " timed out";
        if (result.exit_status != 0)
            return "hook " + std::string(event) + " exited with status " + std::to_string(result.exit_status);
    } catch (const Error& e) {
        return "hook " + std::string(event) + ": " + e.what();
    }
    return {};
}

bool Executor::attempt(const Run& run, const RunContext& ctx, RunMeasures& out) {
    if (auto why = invoke_hook("before_run", &ctx); !why.empty()) {
        out.error = why;
        return false;
    }

    // Start profilers in order; on failure stop the ones already running.
    std::size_t started = 0;
    try {
        for (; started < profilers_.size(); ++started) profilers_[started]->start(ctx);
    } catch (const std::exception& e) {
        for (std::size_t i = started; i-- > 0;) {
            try {
                profilers_[i]->stop(ctx);
            } catch (const std::exception&) {
            }
        }
        out.error = std::string("profiler start failed: ") + e.what();
        return false;
    }

    std::string failure;
    emit(EventKind::start_measurement, run.run_id);
    failure = invoke_hook("start_measurement", &ctx);

    ProcessResult subject_result;
    if (failure.empty()) {
        emit(EventKind::interact, run.run_id);
        failure = invoke_hook("interact", &ctx);
    }
    if (failure.empty()) {
        if (options_.dry_run) {
            subject_result = ProcessResult{};
        } else {
            const Subject* subject = def_.find_subject(run.subject);
            try {
                if (!subject) throw ReferenceError("unknown subject '" + run.subject + "'");
                ProcessSpec spec;
                spec.argv = shell_command(substitute(subject->command_template, ctx.variables));
                spec.working_dir = subject->working_dir;
                spec.extra_env = run_environment(ctx, "interact");
                const auto logs = std::filesystem::path(def_.output_dir) / "logs";
                std::filesystem::create_directories(logs);
                spec.stdout_path = logs / (run.run_id + ".out");
                spec.stderr_path = spec.stdout_path;
                subject_result = run_process(
                    spec, subject->timeout,
                    [&](pid_t pid) {
                        for (auto& p : profilers_) p->on_subject_started(pid);
                    },
                    [&] { return interrupts() >= 2; });
                for (auto& p : profilers_) p->on_subject_exited(subject_result);
            } catch (const Error& e) {
                failure = std::string("cannot launch subject: ") + e.what();
                subject_result.exit_status = 127;
            }
        }
        out.exit_status = subject_result.exit_status;
        out.wall_time = subject_result.wall_time.count();
        if (failure.empty() && subject_result.timed_out)
            failure = "subject timed out after " + format_number(def_.find_subject(run.subject)->timeout.count()) + " s";
        else if (failure.empty() && subject_result.cancelled)
            failure = "subject cancelled by operator";
        else if (failure.empty() && subject_result.exit_status != 0)
            failure = "subject exited with status " + std::to_string(subject_result.exit_status);
    }

    emit(EventKind::stop_measurement, run.run_id);
    if (auto why = invoke_hook("stop_measurement", &ctx); failure.empty()) failure = why;

    // Stop in reverse order; every profiler is stopped even after a failure.
    std::vector<std::optional<MeasureSet>> sets(profilers_.size());
    for (std::size_t i = profilers_.size(); i-- > 0;) {
        try {
            sets[i] = profilers_[i]->stop(ctx);
        } catch (const std::exception& e) {
            if (failure.empty()) failure = std::string("profiler stop failed: ") + e.what();
        }
    }
    if (!failure.empty()) {
        out.error = failure;
        return false;
    }

    out.values.clear();
    for (const auto& spec : def_.metrics) {
        for (std::size_t i = 0; i < profilers_.size(); ++i) {
            if (!sets[i] || !sets[i]->has(spec.name)) continue;
            out.values[spec.name] = aggregate(*sets[i], spec);
            break;
        }
        if (spec.role == MetricRole::dependent && !out.values.count(spec.name)) {
            out.error = "no value for dependent metric '" + spec.name + "'";
            return false;
        }
    }

    if (auto why = invoke_hook("after_run", &ctx); !why.empty()) {
        out.error = why;
        return false;
    }
    return true;
}

RunMeasures Executor::run_one(const Run& run) {
    RunMeasures out;
    out.run_id = run.run_id;
    const auto ctx = make_run_context(def_, run);
    const int max_attempts = 1 + std::max(0, def_.policy.max_retries);
    for (int i = 1; i <= max_attempts; ++i) {
        if (i > 1) emit(EventKind::before_run, run.run_id);
        out.attempts = i;
        out.error.clear();
        if (attempt(run, ctx, out)) {
            out.ok = true;
            return out;
        }
        if (interrupts() >= 2) break;
    }
    out.ok = false;
    return out;
}

void Executor::cooldown() {
    if (options_.skip_cooldown || def_.cooldown.count() <= 0) return;
    const auto until = std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(def_.cooldown);
    while (std::chrono::steady_clock::now() < until) {
        if (interrupts() > 0) return;
        std::this_thread::sleep_for(std::min<std::chrono::steady_clock::duration>(
            std::chrono::milliseconds(100), until - std::chrono::steady_clock::now()));
    }
}

// Returns false when the experiment must stop (aborted, or paused to exit).
bool Executor::operator_loop(const Run& next) {
    while (state_.phase == Phase::waiting_operator || state_.phase == Phase::paused) {
        if (!options_.gate) throw Error("semi-automatic mode needs an operator gate");
        const std::string prompt = state_.phase == Phase::paused
                                       ? "paused; press Enter to resume, 'a' to abort: "
                                       : "next run " + next.run_id + "; press Enter to continue ('p' pause, 'a' abort): ";
        switch (options_.gate->wait(state_, prompt)) {
            case OperatorCommand::proceed: advance(EventKind::continue_requested); break;
            case OperatorCommand::pause: advance(EventKind::pause_requested); break;
            case OperatorCommand::abort: advance(EventKind::abort_requested); return false;
        }
        if (interrupts() > 0) return false;
    }
    return true;
}

ExperimentResult Executor::execute() {
    ExperimentResult result;
    driving_ = true;

    // Fold in everything already journaled.
    const auto completed = journal_.completed();
    for (const auto& [run_id, record] : completed)
        if (!table_.find(run_id))
            throw Error("journal entry " + run_id + " is not in the run table; was the experiment changed?");
    state_ = ExperimentState{};
    state_.total_runs = table_.runs.size();
    state_.mode = def_.mode;
    state_.max_failed_fraction = def_.policy.max_failed_fraction;
    for (auto& run : table_.runs) {
        if (const auto it = completed.find(run.run_id); it != completed.end()) {
            run.status = it->second.status;
            run.measures = it->second.measures;
            (run.status == RunStatus::done ? state_.completed_count : state_.failed_count)++;
        } else {
            run.status = RunStatus::pending;
            run.measures.clear();
        }
    }

    const auto finish = [&](std::string message) {
        result.state = state_;
        result.message = std::move(message);
        result.csv = emit_run_table_csv(table_, journal_.completed());
        if (options_.write_files) {
            write_file_atomic(std::filesystem::path(def_.output_dir) / "run_table.csv", result.csv);
            persist(result.message);
        }
        driving_ = false;
        return result;
    };

    advance(EventKind::before_experiment);
    result.diagnostics = diagnostic_check(def_, profilers_);
    if (!result.diagnostics->passed()) {
        advance(EventKind::abort_requested);
        std::string failed;
        for (const auto& c : result.diagnostics->checks)
            if (!c.passed) failed += (failed.empty() ? "" : ", ") + c.name;
        return finish("diagnostics failed: " + failed);
    }
    if (auto why = invoke_hook("before_experiment", nullptr); !why.empty()) {
        advance(EventKind::abort_requested);
        return finish(why);
    }

    std::string message;
    bool stopped = false;
    for (auto& run : table_.runs) {
        if (run.status != RunStatus::pending) continue;
        if (interrupts() >= 2) {
            advance(EventKind::abort_requested);
            message = "aborted by operator";
            stopped = true;
            break;
        }
        if (interrupts() == 1) {
            advance(EventKind::pause_requested);
            message = "paused by operator; resume with `exr run --resume`";
            stopped = true;
            break;
        }

        advance(EventKind::before_run, run.run_id);
        if (state_.phase == Phase::waiting_operator && !operator_loop(run)) {
            if (state_.phase == Phase::aborted) {
                message = "aborted by operator";
            } else {
                if (state_.phase != Phase::paused) advance(EventKind::pause_requested);
                message = "paused by operator; resume with `exr run --resume`";
            }
            stopped = true;
            break;
        }

        const RunMeasures measures = run_one(run);
        if (!measures.ok && interrupts() >= 2) {
            // Operator abort: the interrupted run is not journaled and will rerun on resume.
            advance(EventKind::abort_requested);
            message = "aborted by operator during " + run.run_id;
            stopped = true;
            break;
        }

        JournalRecord record;
        record.run_id = run.run_id;
        record.status = measures.ok ? RunStatus::done : RunStatus::failed;
        record.measures = measures.values;
        record.wall_time = measures.wall_time;
        record.exit_status = measures.exit_status;
        record.attempts = measures.attempts;
        try {
            journal_.append(record);
        } catch (const StorageError& e) {
            advance(EventKind::abort_requested);
            message = std::string("journal write failed: ") + e.what();
            stopped = true;
            break;
        }
        run.status = record.status;
        run.measures = record.measures;
        result.executed.push_back(measures);

        advance(measures.ok ? EventKind::after_run : EventKind::run_failed);
        if (options_.on_run_finished) options_.on_run_finished(run, measures, state_);
        if (options_.write_files)
            write_file_atomic(std::filesystem::path(def_.output_dir) / "run_table.csv",
                              emit_run_table_csv(table_, journal_.completed()));
        if (state_.phase == Phase::aborted) {
            message = "aborted: failed runs exceed " + format_number(def_.policy.max_failed_fraction * 100) +
                      "% of the run table (last failure: " + measures.error + ")";
            stopped = true;
            break;
        }
        if (state_.phase == Phase::cooling_down) cooldown();
    }

    if (!stopped && state_.phase == Phase::diagnosing) advance(EventKind::after_experiment);
    if (is_terminal(state_.phase)) {
        const auto why = invoke_hook("after_experiment", nullptr);
        advance(EventKind::after_experiment);
        if (message.empty() && !why.empty()) message = why;
    }
    return finish(message);
}

}  // namespace exr
