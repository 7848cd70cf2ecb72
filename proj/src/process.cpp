#include "exr/process.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include "exr/errors.hpp"

extern char** environ;

namespace exr {
namespace {

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

ProcessResult decode(int status, const rusage& usage, double started) {
    ProcessResult r;
    if (WIFEXITED(status))
        r.exit_status = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
        r.exit_status = 128 + WTERMSIG(status);
    r.wall_time = Seconds{now_seconds() - started};
    const auto tv = [](const timeval& t) { return static_cast<double>(t.tv_sec) + t.tv_usec / 1e6; };
    r.cpu_time = Seconds{tv(usage.ru_utime) + tv(usage.ru_stime)};
    r.max_rss_kib = usage.ru_maxrss;
    return r;
}

int open_sink(const std::filesystem::path& path) {
    if (path.empty()) return ::open("/dev/null", O_WRONLY | O_CLOEXEC);
    return ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
}

}  // namespace

std::vector<std::string> shell_command(const std::string& command) {
    return {"/bin/sh", "-c", command};
}

ChildProcess::ChildProcess(pid_t pid) : pid_(pid), start_(now_seconds()) {}

ChildProcess::ChildProcess(ChildProcess&& other) noexcept
    : pid_(other.pid_), start_(other.start_), result_(std::move(other.result_)) {
    other.pid_ = -1;
}

ChildProcess& ChildProcess::operator=(ChildProcess&& other) noexcept {
    if (this != &other) {
        if (running()) kill_and_reap(SIGKILL, Seconds{0.0});
        pid_ = other.pid_;
        start_ = other.start_;
        result_ = std::move(other.result_);
        other.pid_ = -1;
    }
    return *this;
}

ChildProcess::~ChildProcess() {
    if (running()) kill_and_reap(SIGKILL, Seconds{0.0});
}

ChildProcess ChildProcess::spawn(const ProcessSpec& spec) {
    if (spec.argv.empty()) throw Error("cannot spawn an empty command");

    // Everything the child needs is prepared before fork.
    std::vector<std::string> env_storage;
    for (char** e = environ; e && *e; ++e) {
        const std::string entry(*e);
        const auto eq = entry.find('=');
        if (eq != std::string::npos && spec.extra_env.count(entry.substr(0, eq))) continue;
        env_storage.push_back(entry);
    }
    for (const auto& [key, value] : spec.extra_env) env_storage.push_back(key + "=" + value);
    std::vector<char*> envp;
    for (auto& e : env_storage) envp.push_back(e.data());
    envp.push_back(nullptr);

    std::vector<std::string> argv_storage = spec.argv;
    std::vector<char*> argv;
    for (auto& a : argv_storage) argv.push_back(a.data());
    argv.push_back(nullptr);

    int out_fd = -1;
    int err_fd = -1;
    if (!spec.inherit_stdio) {
        out_fd = open_sink(spec.stdout_path);
        err_fd = spec.stderr_path == spec.stdout_path && out_fd >= 0 ? ::dup(out_fd) : open_sink(spec.stderr_path);
        if (out_fd < 0 || err_fd < 0) {
            if (out_fd >= 0) ::close(out_fd);
            if (err_fd >= 0) ::close(err_fd);
            throw Error("cannot open output file for " + spec.argv.front() + ": " + std::strerror(errno));
        }
    }
    const int in_fd = spec.inherit_stdin ? -1 : ::open("/dev/null", O_RDONLY | O_CLOEXEC);
    const std::string cwd = spec.working_dir.string();

    const pid_t pid = ::fork();
    if (pid < 0) throw Error(std::string("fork failed: ") + std::strerror(errno));
    if (pid == 0) {
        ::setpgid(0, 0);
        if (in_fd >= 0) ::dup2(in_fd, STDIN_FILENO);
        if (out_fd >= 0) ::dup2(out_fd, STDOUT_FILENO);
        if (err_fd >= 0) ::dup2(err_fd, STDERR_FILENO);
        if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) _exit(126);
        ::signal(SIGINT, SIG_DFL);
        ::signal(SIGTERM, SIG_DFL);
        ::execve(argv[0], argv.data(), envp.data());
        _exit(errno == ENOENT ? 127 : 126);
    }
    // Set from both sides so the group exists before anyone signals it.
    ::setpgid(pid, pid);
    for (const int fd : {in_fd, out_fd, err_fd})
        if (fd >= 0) ::close(fd);
    return ChildProcess(pid);
}

std::optional<ProcessResult> ChildProcess::poll() {
    if (result_) return result_;
    if (pid_ <= 0) return std::nullopt;
    int status = 0;
    rusage usage{};
    const pid_t r = ::wait4(pid_, &status, WNOHANG, &usage);
    if (r == pid_) {
        result_ = decode(status, usage, start_);
        // Reap stragglers left in the group (background jobs of a shell).
        ::kill(-pid_, SIGKILL);
        return result_;
    }
    return std::nullopt;
}

void ChildProcess::signal_group(int sig) const noexcept {
    if (pid_ > 0 && !result_) ::kill(-pid_, sig);
}

ProcessResult ChildProcess::kill_and_reap(int first_signal, Seconds grace) {
    signal_group(first_signal);
    const double deadline = now_seconds() + grace.count();
    while (!poll()) {
        if (now_seconds() >= deadline) {
            signal_group(SIGKILL);
            int status = 0;
            rusage usage{};
            while (::wait4(pid_, &status, 0, &usage) < 0 && errno == EINTR) {
            }
            result_ = decode(status, usage, start_);
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    return *result_;
}

ProcessResult ChildProcess::terminate(int sig, Seconds grace) {
    if (auto r = poll()) return *r;
    return kill_and_reap(sig, grace);
}

ProcessResult ChildProcess::wait(std::optional<Seconds> timeout, const std::function<bool()>& cancelled,
                                 Seconds grace) {
    const double deadline = timeout ? start_ + timeout->count() : 0.0;
    auto pause = std::chrono::microseconds(200);
    while (true) {
        if (auto r = poll()) return *r;
        if (timeout && now_seconds() >= deadline) {
            auto r = kill_and_reap(SIGTERM, grace);
            result_->timed_out = r.timed_out = true;
            return r;
        }
        if (cancelled && cancelled()) {
            auto r = kill_and_reap(SIGTERM, grace);
            result_->cancelled = r.cancelled = true;
            return r;
        }
        std::this_thread::sleep_for(pause);
        pause = std::min(pause * 2, std::chrono::microseconds(10'000));
    }
}

ProcessResult run_process(const ProcessSpec& spec, std::optional<Seconds> timeout,
                          const std::function<void(pid_t)>& on_started, const std::function<bool()>& cancelled) {
    auto child = ChildProcess::spawn(spec);
    if (on_started) on_started(child.pid());
    return child.wait(timeout, cancelled);
}

}  // namespace exr
