#pragma once

#include <optional>
#include <string>
#include <vector>

#include "exr/design.hpp"
#include "exr/model.hpp"
#include "exr/stats.hpp"

namespace exr {

struct GroupStats {
    std::string label;  ///< "all", "factor=treatment" or "subject=name"
    Descriptive stats;
    std::optional<NormalityResult> normality;
    std::string normality_note;  ///< why normality was not assessed, if it was not
};

struct MetricTable {
    std::string metric;
    std::string unit;
    std::vector<GroupStats> rows;
};

struct HypothesisOutcome {
    Hypothesis hypothesis;
    GroupStats a;
    GroupStats b;
    /// Both groups passed Shapiro-Wilk at alpha: Welch + Cohen's d, else Mann-Whitney + Cliff's delta.
    bool both_normal = false;
    TestResult test;
    EffectSize effect;
    /// Always reported alongside the primary effect size.
    EffectSize cliffs;
};

struct CorrelationOutcome {
    std::string x;
    std::string y;
    std::optional<Correlation> result;
    std::string note;
};

struct AnalysisReport {
    std::string experiment;
    double alpha = 0.05;
    std::size_t total_runs = 0;
    std::size_t done_runs = 0;
    std::size_t failed_runs = 0;
    std::size_t pending_runs = 0;
    std::vector<MetricTable> metrics;
    std::vector<HypothesisOutcome> hypotheses;
    std::vector<CorrelationOutcome> correlations;
    /// Data-sanity and reporting flags (negative energy, missing cells, ...).
    std::vector<std::string> flags;
};

/**
 * @brief Descriptives, normality-gated tests and correlations over done runs.
 *
 * Groups pool every subject and every other factor. Throws
 * InsufficientDataError when there are no done runs or a hypothesis group has
 * fewer than two values.
 */
AnalysisReport analyze(const ExperimentDefinition& def, const RunTable& table);

std::string analysis_to_json(const AnalysisReport& report);
std::string analysis_to_markdown(const AnalysisReport& report);

/// Study-shaped markdown: goal, design, results, one section per research question, sanity flags.
std::string render_report(const ExperimentDefinition& def, const RunTable& table, const AnalysisReport& report);

}  // namespace exr
