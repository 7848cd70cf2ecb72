// Wraps a meter CLI. The command starts with the run and is signalled at stop;
// whatever it printed as `metric_name,value` lines becomes the run's samples.

#include <signal.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>

#include "exr/errors.hpp"
#include "sampler.hpp"

namespace exr::detail {
namespace {

int parse_signal(const std::string& name) {
    if (name == "INT" || name == "SIGINT") return SIGINT;
    if (name == "TERM" || name == "SIGTERM") return SIGTERM;
    if (name == "KILL" || name == "SIGKILL") return SIGKILL;
    if (name == "HUP" || name == "SIGHUP") return SIGHUP;
    throw ProfilerError("external: unsupported stop_signal '" + name + "'");
}

class ExternalCommandProfiler final : public Profiler {
public:
    explicit ExternalCommandProfiler(ProfilerConfig config)
        : config_(std::move(config)),
          command_(setting_string(config_, "command", "")),
          metrics_(split_list(setting_string(config_, "metrics", ""))),
          label_(setting_string(config_, "label", "external")),
          stop_signal_(parse_signal(setting_string(config_, "stop_signal", "INT"))),
          grace_s_(setting_number(config_, "grace_s", 5.0)) {
        if (command_.empty()) throw ProfilerError("external: setting 'command' is required");
        if (metrics_.empty()) throw ProfilerError("external: setting 'metrics' lists no metric");
        for (const auto& pair : split_list(setting_string(config_, "rename", ""))) {
            const auto eq = pair.find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 == pair.size())
                throw ProfilerError("external: rename entries look like 'from=to', got '" + pair + "'");
            rename_[pair.substr(0, eq)] = pair.substr(eq + 1);
        }
    }

    std::string_view kind() const override { return "external"; }
    std::vector<std::string> declared_metrics() const override { return metrics_; }

    Readiness ready() const override {
        // The command runs through /bin/sh; only a direct path can be probed.
        const auto first = command_.substr(0, command_.find(' '));
        if (first.find('/') != std::string::npos && placeholders(first).empty() &&
            !std::filesystem::exists(first))
            return {false, "command not found: " + first};
        return {true, command_};
    }

    void start(const RunContext& ctx) override {
        const std::filesystem::path logs = ctx.output_dir.empty()
                                               ? std::filesystem::temp_directory_path()
                                               : std::filesystem::path(ctx.output_dir) / "logs";
        std::filesystem::create_directories(logs);
        output_ = logs / (ctx.run_id + "." + label_ + ".csv");
        std::filesystem::remove(output_);

        ProcessSpec spec;
        spec.argv = shell_command(substitute(command_, ctx.variables));
        spec.extra_env = run_environment(ctx, "start_measurement");
        spec.stdout_path = output_;
        spec.stderr_path = logs / (ctx.run_id + "." + label_ + ".err");
        child_.emplace(ChildProcess::spawn(spec));
    }

    MeasureSet stop(const RunContext&) override {
        if (!child_) throw ProfilerError("external: stop without start");
        const bool exited_early = child_->poll().has_value();
        const auto result = child_->terminate(stop_signal_, Seconds{grace_s_});
        child_.reset();
        if (exited_early && result.exit_status != 0)
            throw ProfilerError("external: command exited with status " + std::to_string(result.exit_status));
        return parse_output();
    }

private:
    MeasureSet parse_output() const {
        std::ifstream in(output_);
        MeasureSet out;
        std::string line;
        double t = 0.0;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line.front() == '#') continue;
            const auto fields = split_list(line);
            if (fields.size() != 2) continue;
            auto name = fields[0];
            if (const auto it = rename_.find(name); it != rename_.end()) name = it->second;
            if (std::find(metrics_.begin(), metrics_.end(), name) == metrics_.end()) continue;
            char* end = nullptr;
            const double value = std::strtod(fields[1].c_str(), &end);
            if (end != fields[1].c_str() + fields[1].size() || !std::isfinite(value))
                throw ProfilerError("external: malformed value in line '" + line + "'");
            out.add(t, name, value);
            t += 1.0;
        }
        for (const auto& m : metrics_)
            if (!out.has(m)) throw ProfilerError("external: command produced no value for metric '" + m + "'");
        return out;
    }

    ProfilerConfig config_;
    std::string command_;
    std::vector<std::string> metrics_;
    std::map<std::string, std::string> rename_;
    std::string label_;
    int stop_signal_;
    double grace_s_;
    std::filesystem::path output_;
    std::optional<ChildProcess> child_;
};

}  // namespace

std::unique_ptr<Profiler> make_external_profiler(const ProfilerConfig& config) {
    return std::make_unique<ExternalCommandProfiler>(config);
}

}  // namespace exr::detail
