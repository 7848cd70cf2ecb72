#pragma once

#include <sys/types.h>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "exr/command_template.hpp"
#include "exr/model.hpp"
#include "exr/process.hpp"

namespace exr {

struct Sample {
    double timestamp = 0.0;  ///< seconds since run start
    std::string metric;
    double value = 0.0;
};

/// Everything one profiler measured during one run.
struct MeasureSet {
    std::vector<Sample> samples;

    /// Throws ProfilerError on a non-finite value or a timestamp going backwards.
    void add(double timestamp, std::string metric, double value);
    std::vector<double> values(std::string_view metric) const;
    bool has(std::string_view metric) const;
};

/// Collapses one metric's samples with spec.aggregation.
/// Throws MissingMetricError when there is no sample for spec.name.
double aggregate(const MeasureSet& measures, const MetricSpec& spec);

/// Per-run information handed to hooks and profilers.
struct RunContext {
    std::string run_id;
    std::string subject;
    std::int64_t repetition = 1;
    std::vector<std::pair<std::string, std::string>> treatments;
    /// Treatment parameters plus built-in template variables.
    Variables variables;
    std::string output_dir;
    std::uint64_t seed = 0;
};

/// EXR_* variables for hooks and external profilers:
/// EXR_RUN_ID, EXR_SUBJECT, EXR_REPETITION, EXR_TREATMENT_<FACTOR>,
/// EXR_OUTPUT_DIR and EXR_EVENT.
std::map<std::string, std::string> run_environment(const RunContext& ctx, std::string_view event);

/// Factor name as it appears in EXR_TREATMENT_<NAME>.
std::string environment_name(std::string_view factor);

struct Readiness {
    bool ready = true;
    std::string detail;
};

/**
 * @brief Measurement plugin contract.
 *
 * The coordinator calls start() before launching the subject and stop() after
 * it exits, once per run and never for two runs at a time. A plugin may run a
 * background sampler in between; samples are buffered and handed over only
 * from stop(). start/stop failures are reported by throwing ProfilerError.
 */
class Profiler {
public:
    virtual ~Profiler() = default;

    /// Plugin type as named in the config (`synthetic`, `rapl`, ...).
    virtual std::string_view kind() const = 0;
    virtual std::vector<std::string> declared_metrics() const = 0;
    virtual Readiness ready() const = 0;

    virtual void start(const RunContext& ctx) = 0;
    virtual void on_subject_started(pid_t /*pid*/) {}
    virtual void on_subject_exited(const ProcessResult& /*result*/) {}
    virtual MeasureSet stop(const RunContext& ctx) = 0;
};

using ProfilerFactory = std::function<std::unique_ptr<Profiler>(const ProfilerConfig&)>;

/// Adds or replaces a plugin type. Built-ins: synthetic, rapl, external, process.
void register_profiler(const std::string& kind, ProfilerFactory factory);
std::vector<std::string> registered_profilers();

/// Throws ProfilerError for an unknown type or bad settings.
std::unique_ptr<Profiler> make_profiler(const ProfilerConfig& config);

/// Builds all configured profilers and checks their metrics exist in the
/// definition. Throws ProfilerError or ReferenceError.
std::vector<std::unique_ptr<Profiler>> make_profilers(const ExperimentDefinition& def);

/// Default sampling period for sampler-style plugins.
inline constexpr double default_sampling_period_s = 0.1;

}  // namespace exr
