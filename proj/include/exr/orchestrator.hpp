#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "exr/design.hpp"
#include "exr/journal.hpp"
#include "exr/model.hpp"
#include "exr/profilers.hpp"
#include "exr/state_machine.hpp"

namespace exr {

struct CheckOutcome {
    std::string name;  ///< e.g. "output_dir", "hook:before_run", "profiler:energy"
    bool passed = true;
    std::string detail;
};

struct DiagnosticsReport {
    std::vector<CheckOutcome> checks;

    bool passed() const noexcept;
    const CheckOutcome* find(std::string_view name) const;
};

/// Pre-flight checks. Never throws for a failing check; failures are entries.
DiagnosticsReport diagnostic_check(const ExperimentDefinition& def,
                                   const std::vector<std::unique_ptr<Profiler>>& profilers);

/// Values every command template and hook can see for a run.
RunContext make_run_context(const ExperimentDefinition& def, const Run& run);

enum class OperatorCommand { proceed, pause, abort };

/// Source of operator decisions in semi-automatic mode.
class OperatorGate {
public:
    virtual ~OperatorGate() = default;
    virtual OperatorCommand wait(const ExperimentState& state, std::string_view prompt) = 0;
};

/// Reads stdin lines (empty / "c" proceeds, "p" pauses, "a" aborts) and
/// polls the control file written by `exr status --continue`.
class ConsoleGate final : public OperatorGate {
public:
    ConsoleGate(std::filesystem::path output_dir, const std::atomic<int>* interrupts = nullptr);
    OperatorCommand wait(const ExperimentState& state, std::string_view prompt) override;

private:
    std::filesystem::path output_dir_;
    const std::atomic<int>* interrupts_;
};

/// Per-run result after aggregation.
struct RunMeasures {
    std::string run_id;
    std::map<std::string, double> values;
    double wall_time = 0.0;
    int exit_status = 0;
    int attempts = 0;
    bool ok = false;
    std::string error;  ///< reason of the last failed attempt
};

struct ExecutionOptions {
    /// Skip launching subjects (the CLI also swaps in synthetic profilers).
    bool dry_run = false;
    bool skip_cooldown = false;
    /// Write status.json and run_table.csv into the output directory.
    bool write_files = true;
    OperatorGate* gate = nullptr;
    /// Interrupt counter: 1 pauses after the current run, 2 aborts it.
    const std::atomic<int>* interrupts = nullptr;
    std::function<void(const LifecycleEvent&, const ExperimentState&)> on_event;
    std::function<void(const Run&, const RunMeasures&, const ExperimentState&)> on_run_finished;
};

struct ExperimentResult {
    ExperimentState state;
    std::optional<DiagnosticsReport> diagnostics;
    std::vector<RunMeasures> executed;
    std::string csv;
    std::string message;  ///< why the experiment paused or aborted
};

/**
 * @brief Drives a run table through the lifecycle state machine.
 *
 * One run at a time: hooks, profilers, subject process, aggregation,
 * journal append, cooldown. Runs already in the journal are skipped, which is
 * what makes resume after a crash or pause work.
 */
class Executor {
public:
    Executor(const ExperimentDefinition& def, RunTable& table, Journal& journal,
             std::vector<std::unique_ptr<Profiler>>& profilers, ExecutionOptions options = {});

    ExperimentResult execute();

    /// One run with retries. Usable outside execute() for testing.
    RunMeasures run_one(const Run& run);

    const ExperimentState& state() const noexcept { return state_; }

private:
    struct Attempt;

    void advance(EventKind kind, const std::string& run_id = {});
    void emit(EventKind kind, const std::string& run_id);
    bool attempt(const Run& run, const RunContext& ctx, RunMeasures& out);
    std::string invoke_hook(std::string_view event, const RunContext* ctx);
    void persist(const std::string& message = {});
    void cooldown();
    bool operator_loop(const Run& next);
    int interrupts() const noexcept;

    const ExperimentDefinition& def_;
    RunTable& table_;
    Journal& journal_;
    std::vector<std::unique_ptr<Profiler>>& profilers_;
    ExecutionOptions options_;
    ExperimentState state_;
    bool driving_ = false;
};

}  // namespace exr
