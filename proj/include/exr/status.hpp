#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>

#include "exr/state_machine.hpp"

namespace exr {

/// Contents of `status.json` in the output directory.
struct StatusSnapshot {
    std::string experiment;
    Phase phase = Phase::not_started;
    Mode mode = Mode::automatic;
    std::size_t total = 0;
    std::size_t done = 0;
    std::size_t failed = 0;
    std::optional<std::string> current_run;
    double per_run_s = 0.0;
    double cooldown_s = 0.0;
    std::string updated_at;
    std::string message;

    std::size_t pending() const noexcept { return total - done - failed; }
    /// pending * (per_run + cooldown)
    double eta_seconds() const noexcept;
};

StatusSnapshot snapshot_of(const ExperimentState& state, const ExperimentDefinition& def);

/// Write-to-temp, fsync, rename. Throws StorageError.
void write_status(const std::filesystem::path& output_dir, const StatusSnapshot& status);

/// Throws Error if status.json is missing or unreadable.
StatusSnapshot read_status(const std::filesystem::path& output_dir);

/// Human-readable multi-line summary printed by `exr status`.
std::string format_status(const StatusSnapshot& status);

std::string format_duration(double seconds);

/// Writes the file atomically (temp + fsync + rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

// Operator control channel for semi-automatic runs: `exr status --continue`
// drops a request file next to status.json, the runner consumes it.
void post_control_request(const std::filesystem::path& output_dir, const std::string& request);
std::optional<std::string> take_control_request(const std::filesystem::path& output_dir);

}  // namespace exr
