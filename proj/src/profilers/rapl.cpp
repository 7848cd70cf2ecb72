#include <optional>

#include "exr/energy_counter.hpp"
#include "exr/errors.hpp"
#include "sampler.hpp"

namespace exr::detail {
namespace {

// Reads one powercap domain. The sampler reads every period so consecutive
// readings are at most one wrap apart; the per-tick deltas sum to the run's
// energy.
class RaplProfiler final : public Profiler {
public:
    explicit RaplProfiler(ProfilerConfig config)
        : config_(std::move(config)),
          domain_(setting_string(config_, "domain", "/sys/class/powercap/intel-rapl:0")),
          metric_(setting_string(config_, "metric", "energy")),
          period_s_(setting_number(config_, "period_ms", default_sampling_period_s * 1000.0) / 1000.0) {
        if (!(period_s_ > 0)) throw ProfilerError("rapl: period_ms must be > 0");
    }

    std::string_view kind() const override { return "rapl"; }
    std::vector<std::string> declared_metrics() const override { return {metric_}; }

    Readiness ready() const override {
        auto why = EnergyCounterSource::probe(domain_);
        return {why.empty(), why.empty() ? domain_ : std::move(why)};
    }

    void start(const RunContext&) override {
        source_.emplace(domain_);
        last_raw_ = source_->read_raw();
        sampler_.start(period_s_, [this](double t, MeasureSet& sink) {
            const auto raw = source_->read_raw();
            sink.add(t, metric_, read_energy_delta(*source_, last_raw_, raw));
            last_raw_ = raw;
        });
    }

    MeasureSet stop(const RunContext&) override {
        if (!source_) throw ProfilerError("rapl: stop without start");
        sampler_.stop();
        MeasureSet out = sampler_.drain();
        const auto raw = source_->read_raw();
        const double t = std::max(sampler_.elapsed(), out.samples.empty() ? 0.0 : out.samples.back().timestamp);
        out.add(t, metric_, read_energy_delta(*source_, last_raw_, raw));
        source_.reset();
        return out;
    }

private:
    ProfilerConfig config_;
    std::string domain_;
    std::string metric_;
    double period_s_;
    std::optional<EnergyCounterSource> source_;
    // Only touched by the sampler thread between start() and stop().
    std::uint64_t last_raw_ = 0;
    PeriodicSampler sampler_;
};

}  // namespace

std::unique_ptr<Profiler> make_rapl_profiler(const ProfilerConfig& config) {
    return std::make_unique<RaplProfiler>(config);
}

}  // namespace exr::detail
