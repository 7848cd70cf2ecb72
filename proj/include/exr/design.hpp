#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "exr/model.hpp"

namespace exr {

enum class RunStatus { pending, done, failed };

std::string_view to_string(RunStatus status);

/// One repetition of one trial (a subject under one treatment per factor).
struct Run {
    std::string run_id;
    std::string trial_key;
    std::string subject;
    /// (factor, treatment) for every non-fixed factor, in declaration order.
    std::vector<std::pair<std::string, std::string>> treatments;
    std::int64_t repetition = 1;
    std::optional<std::string> block;
    std::map<std::string, double> measures;
    RunStatus status = RunStatus::pending;
    /// Position in the unshuffled cross product.
    std::size_t canonical_index = 0;

    /// Empty string if the run has no such factor.
    const std::string& treatment(std::string_view factor) const;
};

struct RunTable {
    std::vector<Run> runs;
    std::uint64_t seed = 0;
    std::string order_digest;
    /// Column names for the CSV rendering.
    std::vector<std::string> factors;
    std::vector<std::string> metrics;

    std::size_t trial_count() const;
    const Run* find(std::string_view run_id) const;
    Run* find(std::string_view run_id);
};

/// Exact fraction in (0, 1]. Accepts "1/2", "0.25" or "1".
struct Fraction {
    std::uint64_t numerator = 1;
    std::uint64_t denominator = 1;

    static Fraction parse(std::string_view text);
    std::string str() const;
    bool operator==(const Fraction&) const = default;
};

/// Hex FNV-1a over the newline-joined run_id sequence.
std::string order_digest(const std::vector<Run>& runs);

/// Full-factorial run count; throws OverflowError above def.policy.max_runs.
std::uint64_t count_runs(const ExperimentDefinition& def);

/// Unshuffled cross product: block (if any), subject, factors, repetition.
RunTable cross_product(const ExperimentDefinition& def);

/// Cross product in a seeded random order, shuffled within blocks when a
/// blocking factor exists.
RunTable generate_run_table(const ExperimentDefinition& def);

/// Keeps ceil(fraction * trials) trials chosen by the seeded PRNG, with all
/// their repetitions. Selection is a prefix of one seeded permutation, so a
/// smaller fraction always keeps a subset of a larger one.
RunTable apply_fraction(const RunTable& table, Fraction fraction, std::uint64_t seed);

Seconds estimate_duration(std::size_t run_count, Seconds per_run, Seconds cooldown);
Seconds estimate_duration(const RunTable& table, Seconds per_run, Seconds cooldown);

struct FeasibilityVerdict {
    bool ok = true;
    Seconds excess{0.0};  ///< total - budget when over budget
};

inline constexpr Seconds default_budget{40.0 * 3600.0};

/// Feasible only when strictly under budget.
FeasibilityVerdict check_feasibility(Seconds total, Seconds budget = default_budget);

}  // namespace exr
