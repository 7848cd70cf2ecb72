#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "exr/model.hpp"

namespace exr {

enum class Phase {
    not_started,
    diagnosing,
    running,
    cooling_down,
    waiting_operator,
    paused,
    completed,
    aborted,
};

enum class EventKind {
    before_experiment,
    before_run,
    start_measurement,
    interact,
    stop_measurement,
    after_run,
    continue_requested,
    pause_requested,
    abort_requested,
    run_failed,
    after_experiment,
};

inline constexpr std::array all_phases{
    Phase::not_started, Phase::diagnosing, Phase::running,   Phase::cooling_down,
    Phase::waiting_operator, Phase::paused, Phase::completed, Phase::aborted,
};

inline constexpr std::array all_events{
    EventKind::before_experiment, EventKind::before_run,         EventKind::start_measurement,
    EventKind::interact,          EventKind::stop_measurement,   EventKind::after_run,
    EventKind::continue_requested, EventKind::pause_requested,   EventKind::abort_requested,
    EventKind::run_failed,        EventKind::after_experiment,
};

std::string_view to_string(Phase phase);
std::string_view to_string(EventKind kind);
std::optional<Phase> parse_phase(std::string_view text);

/// Phases in which the experiment is in progress and may be paused.
constexpr bool is_active(Phase p) noexcept {
    return p == Phase::diagnosing || p == Phase::running || p == Phase::cooling_down ||
           p == Phase::waiting_operator;
}

constexpr bool is_terminal(Phase p) noexcept { return p == Phase::completed || p == Phase::aborted; }

struct LifecycleEvent {
    EventKind kind;
    std::string run_id;  ///< set for before_run
};

struct ExperimentState {
    Phase phase = Phase::not_started;
    std::optional<std::string> current_run;
    std::size_t completed_count = 0;  ///< runs finished successfully
    std::size_t failed_count = 0;
    std::size_t total_runs = 0;
    Mode mode = Mode::automatic;
    /// Failed runs above this fraction of total_runs abort the experiment.
    double max_failed_fraction = 0.2;
    /// Phase to return to when a pause is lifted.
    std::optional<Phase> resumes_to;

    std::size_t finished() const noexcept { return completed_count + failed_count; }
    std::size_t pending() const noexcept { return total_runs - finished(); }

    bool operator==(const ExperimentState&) const = default;
};

/**
 * Pure transition function of the experiment lifecycle.
 *
 *   not_started  --before_experiment-->  diagnosing
 *   diagnosing   --before_run-->         running
 *   diagnosing   --after_experiment-->   completed      (nothing left to run)
 *   running      --before_run-->         running        (retry attempt)
 *   running      --start_measurement | interact | stop_measurement--> running
 *   running      --after_run-->          cooling_down | completed (last run)
 *   running      --run_failed-->         cooling_down | completed | aborted (failure cap)
 *   cooling_down --before_run-->         running (automatic) | waiting_operator (semi-automatic)
 *   waiting_operator --continue_requested--> running
 *   active       --pause_requested-->    paused
 *   paused       --continue_requested--> phase before the pause
 *   non-terminal --abort_requested-->    aborted
 *   terminal     --after_experiment-->   unchanged
 *
 * Every other pair throws IllegalTransition naming the phase and event.
 */
ExperimentState transition(const ExperimentState& state, const LifecycleEvent& event);

}  // namespace exr
