#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "exr/model.hpp"

namespace exr {

struct Descriptive {
    std::size_t n = 0;
    double mean = 0.0;
    double median = 0.0;
    std::optional<double> sd;  ///< n - 1 denominator; absent for n = 1
    double min = 0.0;
    double max = 0.0;
    double q1 = 0.0;  ///< type-7 quantiles
    double q3 = 0.0;
    std::optional<double> cv;  ///< sd / |mean|; absent when sd is absent or mean is 0
};

/// Throws StatisticsError for an empty sample or non-finite values.
Descriptive descriptive(std::span<const double> values);

/// Linear-interpolation quantile of sorted data, p in [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);

struct NormalityResult {
    double w = 1.0;
    double p_value = 1.0;
};

/// Royston's approximation. Requires 3 <= n <= 5000 and nonzero range.
NormalityResult shapiro_wilk(std::span<const double> values);

enum class Decision { reject, fail_to_reject };
std::string_view to_string(Decision decision);

struct TestResult {
    std::string test_name;
    double statistic = 0.0;
    double p_value = 1.0;
    double alpha = 0.05;
    Decision decision = Decision::fail_to_reject;
    std::optional<double> df;  ///< Welch only
    std::string method;        ///< "exact" or "asymptotic" for Mann-Whitney
};

/**
 * Welch's t test. `direction` states the alternative for a relative to b:
 * a_less tests mean(a) < mean(b).
 */
TestResult welch_t(std::span<const double> a, std::span<const double> b,
                   Direction direction = Direction::two_sided, double alpha = 0.05);

/**
 * Mann-Whitney U with statistic U_a = #(a > b) + #(a == b) / 2.
 *
 * For n_a * n_b <= 64 the p-value comes from the exact permutation
 * distribution conditional on the observed ties; larger samples use the
 * normal approximation with tie and continuity correction.
 */
TestResult mann_whitney(std::span<const double> a, std::span<const double> b,
                        Direction direction = Direction::two_sided, double alpha = 0.05);

/// Largest n_a * n_b handled by exact enumeration.
inline constexpr std::size_t mann_whitney_exact_limit = 64;

enum class EffectMethod { cliffs_delta, cohens_d };
enum class Magnitude { negligible, small, medium, large };
std::string_view to_string(EffectMethod method);
std::string_view to_string(Magnitude magnitude);

struct EffectSize {
    EffectMethod method = EffectMethod::cliffs_delta;
    double value = 0.0;
    Magnitude magnitude = Magnitude::negligible;
};

/// Thresholds 0.147 / 0.33 / 0.474 on |delta|.
Magnitude cliffs_magnitude(double delta);
/// Thresholds 0.2 / 0.5 / 0.8 on |d|.
Magnitude cohens_magnitude(double d);

EffectSize cliffs_delta(std::span<const double> a, std::span<const double> b);
/// Pooled-sd variant. Throws StatisticsError if the pooled sd is 0.
EffectSize cohens_d(std::span<const double> a, std::span<const double> b);

struct Correlation {
    double rho = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

/// Mid-ranks for ties, p from the t approximation with n - 2 df.
Correlation spearman(std::span<const double> x, std::span<const double> y);

/// 1-based mid-ranks in input order.
std::vector<double> midranks(std::span<const double> values);

}  // namespace exr
