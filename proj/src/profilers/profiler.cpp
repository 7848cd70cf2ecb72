#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <mutex>

#include "exr/errors.hpp"
#include "exr/profilers.hpp"
#include "sampler.hpp"

namespace exr {

void MeasureSet::add(double timestamp, std::string metric, double value) {
    if (!std::isfinite(value)) throw ProfilerError("non-finite value for metric '" + metric + "'");
    if (!samples.empty() && timestamp < samples.back().timestamp)
        throw ProfilerError("sample timestamps must be non-decreasing");
    samples.push_back({timestamp, std::move(metric), value});
}

std::vector<double> MeasureSet::values(std::string_view metric) const {
    std::vector<double> out;
    for (const auto& s : samples)
        if (s.metric == metric) out.push_back(s.value);
    return out;
}

bool MeasureSet::has(std::string_view metric) const {
    return std::any_of(samples.begin(), samples.end(), [&](const Sample& s) { return s.metric == metric; });
}

double aggregate(const MeasureSet& measures, const MetricSpec& spec) {
    const auto v = measures.values(spec.name);
    if (v.empty()) throw MissingMetricError("no samples for metric '" + spec.name + "'");
    switch (spec.aggregation) {
        case Aggregation::sum: {
            double total = 0.0;
            for (const double x : v) total += x;
            return total;
        }
        case Aggregation::mean: {
            double total = 0.0;
            for (const double x : v) total += x;
            return total / static_cast<double>(v.size());
        }
        case Aggregation::max: return *std::max_element(v.begin(), v.end());
        case Aggregation::last: return v.back();
    }
    return v.back();
}

std::string environment_name(std::string_view factor) {
    std::string out;
    for (const unsigned char c : factor) out += std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_';
    return out;
}

std::map<std::string, std::string> run_environment(const RunContext& ctx, std::string_view event) {
    std::map<std::string, std::string> env{
        {"EXR_RUN_ID", ctx.run_id},
        {"EXR_SUBJECT", ctx.subject},
        {"EXR_REPETITION", std::to_string(ctx.repetition)},
        {"EXR_OUTPUT_DIR", ctx.output_dir},
        {"EXR_EVENT", std::string(event)},
    };
    for (const auto& [factor, treatment] : ctx.treatments) env["EXR_TREATMENT_" + environment_name(factor)] = treatment;
    return env;
}

namespace detail {

MeasureSet PeriodicSampler::drain() {
    std::lock_guard guard(mutex_);
    if (!error_.empty()) throw ProfilerError("sampler failed: " + error_);
    if (overflowed_) throw ProfilerError("sample buffer overflowed");
    return std::exchange(buffer_, MeasureSet{});
}

double setting_number(const ProfilerConfig& config, const std::string& key, double fallback, const Variables& vars) {
    const auto it = config.settings.find(key);
    if (it == config.settings.end()) return fallback;
    const std::string text = substitute(it->second, vars);
    char* end = nullptr;
    const double value = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(value))
        throw ProfilerError(config.name + ": setting '" + key + "' is not a number: '" + text + "'");
    return value;
}

std::string setting_string(const ProfilerConfig& config, const std::string& key, const std::string& fallback) {
    const auto it = config.settings.find(key);
    return it == config.settings.end() ? fallback : it->second;
}

std::vector<std::string> split_list(const std::string& text, char separator) {
    std::vector<std::string> out;
    std::string item;
    const auto flush = [&] {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
        item.clear();
    };
    for (const char c : text) {
        if (c == separator)
            flush();
        else
            item += c;
    }
    flush();
    return out;
}

}  // namespace detail

namespace {

std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}

std::map<std::string, ProfilerFactory>& registry() {
    static std::map<std::string, ProfilerFactory> factories{
        {"synthetic", detail::make_synthetic_profiler},
        {"rapl", detail::make_rapl_profiler},
        {"external", detail::make_external_profiler},
        {"process", detail::make_process_profiler},
    };
    return factories;
}

}  // namespace

void register_profiler(const std::string& kind, ProfilerFactory factory) {
    std::lock_guard guard(registry_mutex());
    registry()[kind] = std::move(factory);
}

std::vector<std::string> registered_profilers() {
    std::lock_guard guard(registry_mutex());
    std::vector<std::string> out;
    for (const auto& [kind, factory] : registry()) out.push_back(kind);
    return out;
}

std::unique_ptr<Profiler> make_profiler(const ProfilerConfig& config) {
    ProfilerFactory factory;
    {
        std::lock_guard guard(registry_mutex());
        const auto it = registry().find(config.name);
        if (it == registry().end()) throw ProfilerError("unknown profiler '" + config.name + "'");
        factory = it->second;
    }
    return factory(config);
}

std::vector<std::unique_ptr<Profiler>> make_profilers(const ExperimentDefinition& def) {
    std::vector<std::unique_ptr<Profiler>> out;
    for (const auto& config : def.profilers) {
        auto profiler = make_profiler(config);
        for (const auto& metric : profiler->declared_metrics())
            if (!def.find_metric(metric))
                throw ReferenceError("profiler '" + config.name + "' produces metric '" + metric +
                                     "' which is not defined in metrics");
        out.push_back(std::move(profiler));
    }
    return out;
}

}  // namespace exr
