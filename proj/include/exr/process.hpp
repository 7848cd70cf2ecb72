#pragma once

#include <sys/types.h>

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "exr/model.hpp"

namespace exr {

struct ProcessSpec {
    std::vector<std::string> argv;
    std::filesystem::path working_dir;  ///< empty: inherit
    std::map<std::string, std::string> extra_env;
    /// Empty paths discard the stream unless inherit_stdio is set.
    std::filesystem::path stdout_path;
    std::filesystem::path stderr_path;
    bool inherit_stdio = false;
    bool inherit_stdin = false;
};

struct ProcessResult {
    /// Exit code, or 128 + signal number when the process was killed.
    int exit_status = 0;
    bool timed_out = false;
    bool cancelled = false;
    Seconds wall_time{0.0};
    /// User + system CPU time of the process and its reaped descendants.
    Seconds cpu_time{0.0};
    long max_rss_kib = 0;

    bool ok() const noexcept { return exit_status == 0 && !timed_out && !cancelled; }
};

/// A spawned child in its own process group. Killed (whole group) and reaped
/// on destruction if still running.
class ChildProcess {
public:
    static ChildProcess spawn(const ProcessSpec& spec);

    ChildProcess(ChildProcess&& other) noexcept;
    ChildProcess& operator=(ChildProcess&& other) noexcept;
    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;
    ~ChildProcess();

    pid_t pid() const noexcept { return pid_; }
    bool running() const noexcept { return pid_ > 0 && !result_; }

    /// Non-blocking reap.
    std::optional<ProcessResult> poll();

    /// Waits for exit. On timeout or cancellation the group gets SIGTERM,
    /// then SIGKILL after `grace`.
    ProcessResult wait(std::optional<Seconds> timeout = std::nullopt,
                       const std::function<bool()>& cancelled = {}, Seconds grace = Seconds{2.0});

    void signal_group(int sig) const noexcept;

    /// Sends `sig`, waits up to `grace`, then SIGKILL.
    ProcessResult terminate(int sig, Seconds grace);

private:
    explicit ChildProcess(pid_t pid);
    ProcessResult kill_and_reap(int first_signal, Seconds grace);

    pid_t pid_ = -1;
    double start_ = 0.0;
    std::optional<ProcessResult> result_;
};

/// Spawn, optionally report the pid, wait with timeout.
ProcessResult run_process(const ProcessSpec& spec, std::optional<Seconds> timeout = std::nullopt,
                          const std::function<void(pid_t)>& on_started = {},
                          const std::function<bool()>& cancelled = {});

/// argv for running `command` through /bin/sh -c.
std::vector<std::string> shell_command(const std::string& command);

}  // namespace exr
