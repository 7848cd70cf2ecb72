// Deterministic stand-in for a physical meter: energy = power * duration plus
// Gaussian jitter drawn from a stream keyed by (seed, run_id).

#include <cmath>
#include <numbers>

#include "exr/errors.hpp"
#include "exr/rng.hpp"
#include "sampler.hpp"

namespace exr::detail {
namespace {

class SyntheticProfiler final : public Profiler {
public:
    explicit SyntheticProfiler(ProfilerConfig config)
        : config_(std::move(config)), metric_(setting_string(config_, "metric", "energy")) {
        // Settings without placeholders are checked now; the rest at start().
        for (const auto* key : {"power_w", "duration_s", "jitter", "samples"}) {
            const auto it = config_.settings.find(key);
            if (it != config_.settings.end() && placeholders(it->second).empty()) setting_number(config_, key, 0.0);
        }
    }

    std::string_view kind() const override { return "synthetic"; }
    std::vector<std::string> declared_metrics() const override { return {metric_}; }
    Readiness ready() const override { return {}; }

    void start(const RunContext& ctx) override {
        power_ = setting_number(config_, "power_w", 1.0, ctx.variables);
        duration_ = setting_number(config_, "duration_s", 1.0, ctx.variables);
        jitter_ = setting_number(config_, "jitter", 0.0, ctx.variables);
        const double samples = setting_number(config_, "samples", 1.0, ctx.variables);
        if (duration_ < 0 || jitter_ < 0 || samples < 1 || samples != std::floor(samples))
            throw ProfilerError("synthetic: duration_s and jitter must be >= 0 and samples a positive integer");
        samples_ = static_cast<int>(samples);
        started_ = true;
    }

    MeasureSet stop(const RunContext& ctx) override {
        if (!started_) throw ProfilerError("synthetic: stop without start");
        started_ = false;

        SplitMix64 rng(fnv1a(ctx.run_id, ctx.seed ^ 0x243f6a8885a308d3ULL));
        double noise = 0.0;
        if (jitter_ > 0) {
            // Box-Muller; 1 - u keeps the log argument in (0, 1].
            const double u1 = 1.0 - rng.uniform();
            const double u2 = rng.uniform();
            noise = jitter_ * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        }
        const double total = power_ * duration_ + noise;

        MeasureSet out;
        for (int i = 0; i < samples_; ++i)
            out.add(duration_ * (i + 1) / samples_, metric_, total / samples_);
        return out;
    }

private:
    ProfilerConfig config_;
    std::string metric_;
    double power_ = 1.0;
    double duration_ = 1.0;
    double jitter_ = 0.0;
    int samples_ = 1;
    bool started_ = false;
};

}  // namespace

std::unique_ptr<Profiler> make_synthetic_profiler(const ProfilerConfig& config) {
    return std::make_unique<SyntheticProfiler>(config);
}

}  // namespace exr::detail
