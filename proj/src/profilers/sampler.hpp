#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "exr/profilers.hpp"

namespace exr::detail {

/// Calls `tick` every period on a background thread until stop(). Samples go
/// into a bounded buffer that the owning profiler drains at stop time.
class PeriodicSampler {
public:
    static constexpr std::size_t max_buffered_samples = 1u << 20;

    using Tick = std::function<void(double elapsed, MeasureSet& sink)>;

    ~PeriodicSampler() { stop(); }

    void start(double period_s, Tick tick) {
        stop();
        buffer_ = {};
        error_.clear();
        overflowed_ = false;
        origin_ = std::chrono::steady_clock::now();
        thread_ = std::jthread([this, period_s, tick = std::move(tick)](std::stop_token token) {
            const auto period = std::chrono::duration<double>(period_s);
            auto next = origin_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
            std::mutex wait_mutex;
            std::condition_variable_any wake;
            while (!token.stop_requested()) {
                {
                    std::unique_lock lock(wait_mutex);
                    if (wake.wait_until(lock, token, next, [] { return false; })) break;
                }
                if (token.stop_requested()) break;
                next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
                MeasureSet local;
                try {
                    tick(elapsed(), local);
                } catch (const std::exception& e) {
                    std::lock_guard guard(mutex_);
                    error_ = e.what();
                    return;
                }
                std::lock_guard guard(mutex_);
                for (auto& s : local.samples) {
                    if (buffer_.samples.size() >= max_buffered_samples) {
                        overflowed_ = true;
                        break;
                    }
                    buffer_.samples.push_back(std::move(s));
                }
            }
        });
    }

    void stop() {
        if (thread_.joinable()) {
            thread_.request_stop();
            thread_.join();
        }
    }

    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin_).count();
    }

    /// Buffered samples; throws ProfilerError if the sampler failed.
    MeasureSet drain();

    bool running() const { return thread_.joinable(); }

private:
    std::jthread thread_;
    std::mutex mutex_;
    MeasureSet buffer_;
    std::string error_;
    bool overflowed_ = false;
    std::chrono::steady_clock::time_point origin_{};
};

double setting_number(const ProfilerConfig& config, const std::string& key, double fallback,
                      const Variables& vars = {});
std::string setting_string(const ProfilerConfig& config, const std::string& key, const std::string& fallback);
std::vector<std::string> split_list(const std::string& text, char separator = ',');

std::unique_ptr<Profiler> make_synthetic_profiler(const ProfilerConfig& config);
std::unique_ptr<Profiler> make_rapl_profiler(const ProfilerConfig& config);
std::unique_ptr<Profiler> make_external_profiler(const ProfilerConfig& config);
std::unique_ptr<Profiler> make_process_profiler(const ProfilerConfig& config);

}  // namespace exr::detail
