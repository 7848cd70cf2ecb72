#include "exr/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "exr/errors.hpp"

namespace exr {
namespace {

void require_finite(std::span<const double> v, std::string_view what) {
    for (const double x : v)
        if (!std::isfinite(x)) throw StatisticsError(std::string(what) + ": sample contains a non-finite value");
}

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(std::span<const double> v, double mean) {
    double ss = 0.0;
    for (const double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size() - 1);
}

double normal_sf(double z) {
    return boost::math::cdf(boost::math::complement(boost::math::normal_distribution<>{}, z));
}

double normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<>{}, p);
}

double poly(std::span<const double> c, double x) {
    double r = 0.0;
    for (std::size_t i = c.size(); i-- > 0;) r = r * x + c[i];
    return r;
}

Decision decide(double p, double alpha) {
    return p < alpha ? Decision::reject : Decision::fail_to_reject;
}

double clamp01(double p) {
    return std::clamp(p, 0.0, 1.0);
}

}  // namespace

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw StatisticsError("quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Descriptive descriptive(std::span<const double> values) {
    if (values.empty()) throw StatisticsError("descriptive statistics of an empty sample");
    require_finite(values, "descriptive");
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    Descriptive d;
    d.n = s.size();
    d.mean = mean_of(s);
    d.median = quantile_sorted(s, 0.5);
    d.min = s.front();
    d.max = s.back();
    d.q1 = quantile_sorted(s, 0.25);
    d.q3 = quantile_sorted(s, 0.75);
    if (d.n >= 2) {
        d.sd = std::sqrt(variance_of(s, d.mean));
        if (d.mean != 0.0) d.cv = *d.sd / std::abs(d.mean);
    }
    return d;
}

NormalityResult shapiro_wilk(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 3 || n > 5000) throw DomainError("shapiro_wilk needs 3 <= n <= 5000, got n = " + std::to_string(n));
    require_finite(values, "shapiro_wilk");
    std::vector<double> x(values.begin(), values.end());
    std::sort(x.begin(), x.end());
    if (x.back() - x.front() <= 0.0) throw StatisticsError("shapiro_wilk: zero-variance sample");

    static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
    static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
    static constexpr double c3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
    static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
    static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
    static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
    static constexpr double g[] = {-2.273, 0.459};

    const double an = static_cast<double>(n);
    const std::size_t half = n / 2;
    std::vector<double> a(half);
    if (n == 3) {
        a[0] = std::sqrt(0.5);
    } else {
        std::vector<double> m(half);
        double summ2 = 0.0;
        for (std::size_t i = 0; i < half; ++i) {
            m[i] = normal_quantile((static_cast<double>(i + 1) - 0.375) / (an + 0.25));
            summ2 += m[i] * m[i];
        }
        summ2 *= 2.0;
        const double ssumm2 = std::sqrt(summ2);
        const double rsn = 1.0 / std::sqrt(an);
        const double a1 = poly(c1, rsn) - m[0] / ssumm2;
        std::size_t first;
        double fac;
        if (n > 5) {
            const double a2 = -m[1] / ssumm2 + poly(c2, rsn);
            fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
            a[1] = a2;
            first = 2;
        } else {
            fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
            first = 1;
        }
        a[0] = a1;
        for (std::size_t i = first; i < half; ++i) a[i] = -m[i] / fac;
    }

    const double mean = mean_of(x);
    double ss = 0.0;
    for (const double v : x) ss += (v - mean) * (v - mean);
    double num = 0.0;
    for (std::size_t i = 0; i < half; ++i) num += a[i] * (x[n - 1 - i] - x[i]);
    const double w = std::min(1.0, num * num / ss);

    NormalityResult r;
    r.w = w;
    if (n == 3) {
        constexpr double pi6 = 1.90985931710274;
        constexpr double stqr = 1.04719755119660;
        r.p_value = std::max(0.0, pi6 * (std::asin(std::sqrt(w)) - stqr));
        return r;
    }
    const double w1 = std::log(1.0 - w);
    double y, mu, sigma;
    if (n <= 11) {
        const double gamma = poly(g, an);
        if (w1 >= gamma) {
            r.p_value = 1e-99;
            return r;
        }
        y = -std::log(gamma - w1);
        mu = poly(c3, an);
        sigma = std::exp(poly(c4, an));
    } else {
        const double xx = std::log(an);
        y = w1;
        mu = poly(c5, xx);
        sigma = std::exp(poly(c6, xx));
    }
    r.p_value = clamp01(normal_sf((y - mu) / sigma));
    return r;
}

std::string_view to_string(Decision decision) {
    return decision == Decision::reject ? "reject" : "fail_to_reject";
}

TestResult welch_t(std::span<const double> a, std::span<const double> b, Direction direction, double alpha) {
    if (a.size() < 2 || b.size() < 2) throw StatisticsError("welch_t needs at least 2 values per sample");
    require_finite(a, "welch_t");
    require_finite(b, "welch_t");
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    const double va = variance_of(a, ma) / static_cast<double>(a.size());
    const double vb = variance_of(b, mb) / static_cast<double>(b.size());
    if (va + vb <= 0.0) throw StatisticsError("welch_t: both samples have zero variance");

    TestResult r;
    r.test_name = "welch_t";
    r.alpha = alpha;
    r.statistic = (ma - mb) / std::sqrt(va + vb);
    const double df = (va + vb) * (va + vb) /
                      (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
    r.df = df;
    const boost::math::students_t_distribution<> t(df);
    switch (direction) {
        case Direction::two_sided:
            r.p_value = 2.0 * boost::math::cdf(boost::math::complement(t, std::abs(r.statistic)));
            break;
        case Direction::a_less: r.p_value = boost::math::cdf(t, r.statistic); break;
        case Direction::a_greater: r.p_value = boost::math::cdf(boost::math::complement(t, r.statistic)); break;
    }
    r.p_value = clamp01(r.p_value);
    r.decision = decide(r.p_value, alpha);
    return r;
}

namespace {

// Exact null distribution of 2*U_a given the tie structure of the pooled
// sample: counts[k] = number of label assignments with 2*U_a == k.
std::vector<double> exact_u2_distribution(std::size_t na, const std::vector<std::size_t>& groups) {
    const std::size_t max_u2 = 2 * na * (std::accumulate(groups.begin(), groups.end(), std::size_t{0}) - na);
    // dp[j][u2]: ways to place j values of a among the groups seen so far.
    std::vector<std::vector<double>> dp(na + 1, std::vector<double>(max_u2 + 1, 0.0));
    dp[0][0] = 1.0;
    std::size_t seen = 0;
    for (const std::size_t t : groups) {
        std::vector<std::vector<double>> next(na + 1, std::vector<double>(max_u2 + 1, 0.0));
        for (std::size_t j = 0; j <= std::min(na, seen); ++j) {
            const std::size_t b_below = seen - j;
            double choose = 1.0;  // C(t, k)
            for (std::size_t k = 0; k <= t && j + k <= na; ++k) {
                if (k > 0) choose = choose * static_cast<double>(t - k + 1) / static_cast<double>(k);
                const std::size_t add = k * (2 * b_below + (t - k));
                for (std::size_t u = 0; u + add <= max_u2; ++u)
                    if (dp[j][u] != 0.0) next[j + k][u + add] += dp[j][u] * std::round(choose);
            }
        }
        dp = std::move(next);
        seen += t;
    }
    return dp[na];
}

}  // namespace

TestResult mann_whitney(std::span<const double> a, std::span<const double> b, Direction direction, double alpha) {
    if (a.empty() || b.empty()) throw StatisticsError("mann_whitney needs non-empty samples");
    require_finite(a, "mann_whitney");
    require_finite(b, "mann_whitney");
    const std::size_t na = a.size();
    const std::size_t nb = b.size();

    std::vector<double> sb(b.begin(), b.end());
    std::sort(sb.begin(), sb.end());
    std::size_t u2 = 0;  // 2 * U_a, an integer
    for (const double x : a) {
        const auto lo = std::lower_bound(sb.begin(), sb.end(), x);
        const auto hi = std::upper_bound(lo, sb.end(), x);
        u2 += 2 * static_cast<std::size_t>(lo - sb.begin()) + static_cast<std::size_t>(hi - lo);
    }

    TestResult r;
    r.test_name = "mann_whitney";
    r.alpha = alpha;
    r.statistic = static_cast<double>(u2) / 2.0;
    const std::size_t nanb = na * nb;

    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::sort(pooled.begin(), pooled.end());
    std::vector<std::size_t> groups;
    for (std::size_t i = 0; i < pooled.size();) {
        std::size_t j = i;
        while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
        groups.push_back(j - i);
        i = j;
    }

    if (nanb <= mann_whitney_exact_limit) {
        r.method = "exact";
        const auto counts = exact_u2_distribution(na, groups);
        double total = 0.0, tail = 0.0;
        const auto obs_dist = static_cast<long long>(u2) - static_cast<long long>(nanb);
        for (std::size_t k = 0; k < counts.size(); ++k) {
            if (counts[k] == 0.0) continue;
            total += counts[k];
            bool extreme = false;
            switch (direction) {
                case Direction::two_sided:
                    extreme = std::llabs(static_cast<long long>(k) - static_cast<long long>(nanb)) >= std::llabs(obs_dist);
                    break;
                case Direction::a_less: extreme = k <= u2; break;
                case Direction::a_greater: extreme = k >= u2; break;
            }
            if (extreme) tail += counts[k];
        }
        r.p_value = clamp01(tail / total);
    } else {
        r.method = "asymptotic";
        const double n = static_cast<double>(na + nb);
        double tie_term = 0.0;
        for (const std::size_t t : groups) {
            const double td = static_cast<double>(t);
            tie_term += td * td * td - td;
        }
        const double mu = static_cast<double>(nanb) / 2.0;
        const double sigma =
            std::sqrt(static_cast<double>(nanb) / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0))));
        const double ua = r.statistic;
        const double ub = static_cast<double>(nanb) - ua;
        if (sigma <= 0.0) {
            r.p_value = 1.0;
        } else {
            double u = ua;
            if (direction == Direction::a_less) u = ub;
            if (direction == Direction::two_sided) u = std::max(ua, ub);
            const double z = (u - mu - 0.5) / sigma;
            r.p_value = normal_sf(z);
            if (direction == Direction::two_sided) r.p_value *= 2.0;
        }
        r.p_value = clamp01(r.p_value);
    }
    r.decision = decide(r.p_value, alpha);
    return r;
}

std::string_view to_string(EffectMethod method) {
    return method == EffectMethod::cliffs_delta ? "cliffs_delta" : "cohens_d";
}

std::string_view to_string(Magnitude magnitude) {
    switch (magnitude) {
        case Magnitude::negligible: return "negligible";
        case Magnitude::small: return "small";
        case Magnitude::medium: return "medium";
        case Magnitude::large: return "large";
    }
    return "negligible";
}

Magnitude cliffs_magnitude(double delta) {
    const double d = std::abs(delta);
    if (d < 0.147) return Magnitude::negligible;
    if (d < 0.33) return Magnitude::small;
    if (d < 0.474) return Magnitude::medium;
    return Magnitude::large;
}

Magnitude cohens_magnitude(double d) {
    const double x = std::abs(d);
    if (x < 0.2) return Magnitude::negligible;
    if (x < 0.5) return Magnitude::small;
    if (x < 0.8) return Magnitude::medium;
    return Magnitude::large;
}

EffectSize cliffs_delta(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw StatisticsError("cliffs_delta needs non-empty samples");
    require_finite(a, "cliffs_delta");
    require_finite(b, "cliffs_delta");
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sb.begin(), sb.end());
    long long more = 0, less = 0;
    for (const double x : a) {
        less += sb.end() - std::upper_bound(sb.begin(), sb.end(), x);
        more += std::lower_bound(sb.begin(), sb.end(), x) - sb.begin();
    }
    EffectSize e;
    e.method = EffectMethod::cliffs_delta;
    e.value = static_cast<double>(more - less) / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
    e.magnitude = cliffs_magnitude(e.value);
    return e;
}

EffectSize cohens_d(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw StatisticsError("cohens_d needs at least 2 values per sample");
    require_finite(a, "cohens_d");
    require_finite(b, "cohens_d");
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double pooled =
        std::sqrt(((na - 1.0) * variance_of(a, ma) + (nb - 1.0) * variance_of(b, mb)) / (na + nb - 2.0));
    if (pooled <= 0.0) throw StatisticsError("cohens_d: pooled standard deviation is zero");
    EffectSize e;
    e.method = EffectMethod::cohens_d;
    e.value = (ma - mb) / pooled;
    e.magnitude = cohens_magnitude(e.value);
    return e;
}

std::vector<double> midranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
        const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
        i = j;
    }
    return ranks;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw StatisticsError("spearman: samples differ in length");
    if (x.size() < 3) throw StatisticsError("spearman needs at least 3 pairs");
    require_finite(x, "spearman");
    require_finite(y, "spearman");
    const auto rx = midranks(x);
    const auto ry = midranks(y);
    const double mx = mean_of(rx);
    const double my = mean_of(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) throw StatisticsError("spearman: constant vector");
    Correlation c;
    c.n = x.size();
    c.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double df = static_cast<double>(c.n) - 2.0;
    if (std::abs(c.rho) >= 1.0) {
        c.p_value = 0.0;
    } else {
        const double t = c.rho * std::sqrt(df / (1.0 - c.rho * c.rho));
        c.p_value = clamp01(2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<>(df), std::abs(t))));
    }
    return c;
}

}  // namespace exr
