#pragma once

#include <atomic>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace exr {

class OperatorGate;

/// Process exit codes of the `exr` tool.
enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,  ///< bad arguments, parse or validation errors
    exit_infeasible = 2,
    exit_diagnostics = 3,
    exit_aborted = 4,
    exit_paused = 5,
};

struct CommandIo {
    std::ostream& out;
    std::ostream& err;
};

/// Scaffolds a replication package. Refuses a non-empty directory.
int cmd_init(const std::string& name, const std::filesystem::path& dir, CommandIo io);

struct PlanOptions {
    std::filesystem::path config;
    std::optional<std::string> fraction;
};

int cmd_plan(const PlanOptions& options, CommandIo io);

struct RunOptions {
    std::filesystem::path config;
    bool resume = false;
    bool force = false;
    bool dry_run = false;
    std::optional<std::string> fraction;
    /// Incremented by the SIGINT handler: 1 pauses, 2 aborts.
    const std::atomic<int>* interrupts = nullptr;
    /// Defaults to a console gate in semi-automatic mode.
    OperatorGate* gate = nullptr;
    bool quiet = false;
};

int cmd_run(const RunOptions& options, CommandIo io);

/// `target` is an output directory or a config file.
int cmd_status(const std::filesystem::path& target, bool post_continue, CommandIo io);
int cmd_analyze(const std::filesystem::path& target, CommandIo io);
int cmd_report(const std::filesystem::path& target, CommandIo io);

/// Parses argv and dispatches to a command.
int run_cli(int argc, const char* const* argv, CommandIo io, const std::atomic<int>* interrupts = nullptr);

}  // namespace exr
