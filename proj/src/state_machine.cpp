#include "exr/state_machine.hpp"

#include "exr/errors.hpp"

namespace exr {

std::string_view to_string(Phase phase) {
    switch (phase) {
        case Phase::not_started: return "not_started";
        case Phase::diagnosing: return "diagnosing";
        case Phase::running: return "running";
        case Phase::cooling_down: return "cooling_down";
        case Phase::waiting_operator: return "waiting_operator";
        case Phase::paused: return "paused";
        case Phase::completed: return "completed";
        case Phase::aborted: return "aborted";
    }
    return "not_started";
}

std::string_view to_string(EventKind kind) {
    switch (kind) {
        case EventKind::before_experiment: return "before_experiment";
        case EventKind::before_run: return "before_run";
        case EventKind::start_measurement: return "start_measurement";
        case EventKind::interact: return "interact";
        case EventKind::stop_measurement: return "stop_measurement";
        case EventKind::after_run: return "after_run";
        case EventKind::continue_requested: return "continue_requested";
        case EventKind::pause_requested: return "pause_requested";
        case EventKind::abort_requested: return "abort_requested";
        case EventKind::run_failed: return "run_failed";
        case EventKind::after_experiment: return "after_experiment";
    }
    return "before_experiment";
}

std::optional<Phase> parse_phase(std::string_view text) {
    for (const Phase p : all_phases)
        if (to_string(p) == text) return p;
    return std::nullopt;
}

namespace {

[[noreturn]] void illegal(const ExperimentState& s, const LifecycleEvent& e, std::string_view why = {}) {
    std::string msg = "illegal transition: event " + std::string(to_string(e.kind)) + " in phase " +
                      std::string(to_string(s.phase));
    if (!why.empty()) msg += " (" + std::string(why) + ")";
    throw IllegalTransition(msg);
}

// After a run reaches a terminal outcome: finish, abort or cool down.
ExperimentState settle(ExperimentState next) {
    next.current_run.reset();
    const double cap = next.max_failed_fraction * static_cast<double>(next.total_runs);
    if (static_cast<double>(next.failed_count) > cap)
        next.phase = Phase::aborted;
    else if (next.finished() == next.total_runs)
        next.phase = Phase::completed;
    else
        next.phase = Phase::cooling_down;
    return next;
}

}  // namespace

ExperimentState transition(const ExperimentState& state, const LifecycleEvent& event) {
    ExperimentState next = state;
    const EventKind e = event.kind;

    if (is_terminal(state.phase)) {
        if (e == EventKind::after_experiment) return next;
        illegal(state, event, "experiment is over");
    }
    if (e == EventKind::abort_requested) {
        next.phase = Phase::aborted;
        next.resumes_to.reset();
        return next;
    }
    if (e == EventKind::pause_requested) {
        if (state.phase == Phase::paused) return next;
        if (!is_active(state.phase)) illegal(state, event);
        next.resumes_to = state.phase;
        next.phase = Phase::paused;
        return next;
    }

    switch (state.phase) {
        case Phase::not_started:
            if (e == EventKind::before_experiment) {
                next.phase = Phase::diagnosing;
                return next;
            }
            break;

        case Phase::diagnosing:
            if (e == EventKind::before_run) {
                if (state.pending() == 0) illegal(state, event, "no pending runs");
                next.phase = Phase::running;
                next.current_run = event.run_id;
                return next;
            }
            if (e == EventKind::after_experiment) {
                if (state.pending() != 0) illegal(state, event, "runs are still pending");
                next.phase = Phase::completed;
                return next;
            }
            break;

        case Phase::running:
            switch (e) {
                case EventKind::before_run:
                    next.current_run = event.run_id.empty() ? state.current_run : event.run_id;
                    return next;
                case EventKind::start_measurement:
                case EventKind::interact:
                case EventKind::stop_measurement:
                    return next;
                case EventKind::after_run:
                    if (state.pending() == 0) illegal(state, event, "no pending runs");
                    ++next.completed_count;
                    return settle(std::move(next));
                case EventKind::run_failed:
                    if (state.pending() == 0) illegal(state, event, "no pending runs");
                    ++next.failed_count;
                    return settle(std::move(next));
                default:
                    break;
            }
            break;

        case Phase::cooling_down:
            if (e == EventKind::before_run) {
                next.current_run = event.run_id;
                next.phase = state.mode == Mode::semi_automatic ? Phase::waiting_operator : Phase::running;
                return next;
            }
            break;

        case Phase::waiting_operator:
            if (e == EventKind::continue_requested) {
                next.phase = Phase::running;
                return next;
            }
            break;

        case Phase::paused:
            if (e == EventKind::continue_requested) {
                next.phase = state.resumes_to.value_or(Phase::running);
                next.resumes_to.reset();
                return next;
            }
            break;

        case Phase::completed:
        case Phase::aborted:
            break;
    }
    illegal(state, event);
}

}  // namespace exr
