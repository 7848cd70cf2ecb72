#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace exr {

using Seconds = std::chrono::duration<double>;

enum class FactorKind { main, co_factor, blocking, fixed };

struct Treatment {
    std::string name;
    /// Substituted into subject command templates as `{key}`.
    std::map<std::string, std::string> parameters;

    bool operator==(const Treatment&) const = default;
};

struct Factor {
    std::string name;
    FactorKind kind = FactorKind::main;
    std::vector<Treatment> treatments;

    /// Fixed factors are documentation only and never multiply runs.
    bool expands() const noexcept { return kind != FactorKind::fixed; }
    const Treatment* find_treatment(std::string_view treatment) const;

    bool operator==(const Factor&) const = default;
};

struct Subject {
    std::string name;
    std::string command_template;
    std::string working_dir = ".";
    Seconds timeout{600.0};

    bool operator==(const Subject&) const = default;
};

enum class UnitKind { joule, watt, second, percent, byte, count, custom };

struct MetricUnit {
    UnitKind kind = UnitKind::count;
    std::string custom;  ///< label when kind == custom

    bool operator==(const MetricUnit&) const = default;
};

enum class Aggregation { sum, mean, max, last };
enum class MetricRole { dependent, diagnostic };

struct MetricSpec {
    std::string name;
    MetricUnit unit;
    Aggregation aggregation = Aggregation::mean;
    MetricRole role = MetricRole::dependent;

    bool operator==(const MetricSpec&) const = default;
};

enum class Direction { two_sided, a_less, a_greater };

struct Hypothesis {
    std::string id;
    std::string metric;
    std::string factor;
    std::string treatment_a;
    std::string treatment_b;
    Direction direction = Direction::two_sided;
    /// 1-based index into the GQM research questions this hypothesis answers.
    std::optional<int> question;

    bool operator==(const Hypothesis&) const = default;
};

struct GqmGoal {
    std::string goal_statement;
    std::vector<std::string> research_questions;
    std::vector<std::string> metrics;

    bool operator==(const GqmGoal&) const = default;
};

enum class Mode { automatic, semi_automatic };

struct ProfilerConfig {
    std::string name;
    std::map<std::string, std::string> settings;

    bool operator==(const ProfilerConfig&) const = default;
};

/// Retry, failure, significance and budget limits.
struct ExecutionPolicy {
    int max_retries = 1;
    double max_failed_fraction = 0.2;
    double alpha = 0.05;
    Seconds budget{40.0 * 3600.0};
    std::uint64_t max_runs = 10'000'000;

    bool operator==(const ExecutionPolicy&) const = default;
};

struct ExperimentDefinition {
    std::string name;
    GqmGoal gqm;
    std::vector<Factor> factors;
    std::vector<Subject> subjects;
    std::vector<MetricSpec> metrics;
    std::vector<Hypothesis> hypotheses;
    std::int64_t repetitions = 1;
    Seconds cooldown{30.0};
    Seconds estimated_run_time{600.0};
    Mode mode = Mode::automatic;
    std::uint64_t seed = 0;
    std::vector<ProfilerConfig> profilers;
    /// Lifecycle event name -> executable path.
    std::map<std::string, std::string> hooks;
    std::string output_dir = "results";
    ExecutionPolicy policy;

    const Factor* find_factor(std::string_view factor) const;
    const MetricSpec* find_metric(std::string_view metric) const;
    const Subject* find_subject(std::string_view subject) const;
    /// Non-fixed factors in declaration order.
    std::vector<const Factor*> design_factors() const;
    const Factor* blocking_factor() const;
    std::vector<const MetricSpec*> dependent_metrics() const;

    bool operator==(const ExperimentDefinition&) const = default;
};

/// Hook names accepted in the `hooks` object.
const std::vector<std::string>& hook_event_names();

/// Variables every command template may use besides treatment parameters.
const std::vector<std::string>& builtin_template_variables();

bool is_identifier(std::string_view s);
bool is_parameter_key(std::string_view s);

std::string_view to_string(FactorKind kind);
std::string_view to_string(Aggregation aggregation);
std::string_view to_string(MetricRole role);
std::string_view to_string(Direction direction);
std::string_view to_string(Mode mode);
std::string to_string(const MetricUnit& unit);

/**
 * @brief Parse a JSON config document into a definition with defaults applied.
 *
 * Throws SyntaxError (with line/column), UnknownFieldError, SchemaError or
 * ReferenceError. Relative paths are kept as written; see load_definition.
 */
ExperimentDefinition parse_definition(std::string_view document);

/// Parse a config file and resolve relative paths against its directory.
ExperimentDefinition load_definition(const std::filesystem::path& config_path);

/// Canonical JSON (sorted keys, two-space indent). Stable byte-for-byte.
std::string serialize_definition(const ExperimentDefinition& def);

enum class Severity { error, warning };

struct Finding {
    Severity severity;
    std::string message;
};

struct ValidationReport {
    std::vector<Finding> findings;

    bool has_errors() const noexcept;
    std::vector<std::string> errors() const;
};

ValidationReport validate(const ExperimentDefinition& def);

}  // namespace exr
