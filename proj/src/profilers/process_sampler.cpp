// CPU utilisation (and optionally resident memory) of the subject's process
// group, sampled from /proc.

#include <unistd.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "exr/errors.hpp"
#include "sampler.hpp"

namespace exr::detail {
namespace {

struct GroupUsage {
    std::uint64_t cpu_ticks = 0;
    std::uint64_t rss_pages = 0;
};

// Sums utime+stime+cutime+cstime and rss over live members of a process group.
GroupUsage read_group(pid_t pgid) {
    GroupUsage usage;
    for (const auto& entry : std::filesystem::directory_iterator("/proc")) {
        const auto name = entry.path().filename().string();
        if (name.empty() || !std::isdigit(static_cast<unsigned char>(name[0]))) continue;
        std::ifstream in(entry.path() / "stat");
        std::string line;
        if (!in || !std::getline(in, line)) continue;
        const auto close = line.rfind(')');
        if (close == std::string::npos) continue;
        std::istringstream fields(line.substr(close + 2));
        // Field 3 (state) onwards.
        std::vector<std::string> f;
        std::string token;
        while (fields >> token && f.size() < 22) f.push_back(token);
        if (f.size() < 22) continue;
        long pgrp = 0;
        std::from_chars(f[2].data(), f[2].data() + f[2].size(), pgrp);
        if (pgrp != pgid) continue;
        for (const int idx : {11, 12, 13, 14}) {  // utime stime cutime cstime
            std::uint64_t v = 0;
            std::from_chars(f[idx].data(), f[idx].data() + f[idx].size(), v);
            usage.cpu_ticks += v;
        }
        std::uint64_t rss = 0;
        std::from_chars(f[21].data(), f[21].data() + f[21].size(), rss);
        usage.rss_pages += rss;
    }
    return usage;
}

class ProcessSampler final : public Profiler {
public:
    explicit ProcessSampler(ProfilerConfig config)
        : config_(std::move(config)),
          cpu_metric_(setting_string(config_, "metric", "cpu_percent")),
          memory_metric_(setting_string(config_, "memory_metric", "")),
          period_s_(setting_number(config_, "period_ms", default_sampling_period_s * 1000.0) / 1000.0) {
        if (!(period_s_ > 0)) throw ProfilerError("process: period_ms must be > 0");
    }

    std::string_view kind() const override { return "process"; }

    std::vector<std::string> declared_metrics() const override {
        std::vector<std::string> out{cpu_metric_};
        if (!memory_metric_.empty()) out.push_back(memory_metric_);
        return out;
    }

    Readiness ready() const override {
        if (!std::filesystem::exists("/proc/self/stat")) return {false, "/proc is not mounted"};
        return {};
    }

    void start(const RunContext&) override {
        exit_.reset();
        pgid_ = -1;
    }

    void on_subject_started(pid_t pid) override {
        pgid_ = pid;
        last_ = read_group(pgid_);
        sampler_.start(period_s_, [this](double t, MeasureSet& sink) {
            static const double ticks_per_s = static_cast<double>(::sysconf(_SC_CLK_TCK));
            static const double page_size = static_cast<double>(::sysconf(_SC_PAGESIZE));
            const auto now = read_group(pgid_);
            const double dt = t - last_t_;
            if (dt > 0 && now.cpu_ticks >= last_.cpu_ticks) {
                sink.add(t, cpu_metric_, 100.0 * static_cast<double>(now.cpu_ticks - last_.cpu_ticks) / ticks_per_s / dt);
                if (!memory_metric_.empty() && now.rss_pages > 0)
                    sink.add(t, memory_metric_, static_cast<double>(now.rss_pages) * page_size);
            }
            last_ = now;
            last_t_ = t;
        });
    }

    void on_subject_exited(const ProcessResult& result) override {
        sampler_.stop();
        exit_ = result;
    }

    MeasureSet stop(const RunContext&) override {
        sampler_.stop();
        MeasureSet out = sampler_.drain();
        last_t_ = 0.0;
        // Runs shorter than one period fall back to the rusage totals.
        if (!out.has(cpu_metric_) && exit_ && exit_->wall_time.count() > 0)
            out.add(exit_->wall_time.count(), cpu_metric_, 100.0 * exit_->cpu_time.count() / exit_->wall_time.count());
        if (!memory_metric_.empty() && !out.has(memory_metric_) && exit_)
            out.add(exit_->wall_time.count(), memory_metric_, static_cast<double>(exit_->max_rss_kib) * 1024.0);
        if (!out.has(cpu_metric_)) throw ProfilerError("process: subject was never observed");
        return out;
    }

private:
    ProfilerConfig config_;
    std::string cpu_metric_;
    std::string memory_metric_;
    double period_s_;
    pid_t pgid_ = -1;
    GroupUsage last_;
    double last_t_ = 0.0;
    std::optional<ProcessResult> exit_;
    PeriodicSampler sampler_;
};

}  // namespace

std::unique_ptr<Profiler> make_process_profiler(const ProfilerConfig& config) {
    return std::make_unique<ProcessSampler>(config);
}

}  // namespace exr::detail
