#include "exr/design.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <numeric>
#include <set>
#include <unordered_set>

#include "exr/errors.hpp"
#include "exr/rng.hpp"

namespace exr {
namespace {

constexpr std::uint64_t kOrderStream = 0x6a09e667f3bcc908ULL;

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b, std::uint64_t cap) {
    if (a != 0 && b > cap / a) throw OverflowError("run table exceeds the cap of " + std::to_string(cap) + " runs");
    return a * b;
}

// Shuffles each maximal block segment in place. Segments must already be
// contiguous (true for canonical order and for any block-grouped order).
void shuffle_within_blocks(std::vector<Run>& runs, SplitMix64& rng) {
    std::size_t begin = 0;
    while (begin < runs.size()) {
        std::size_t end = begin + 1;
        while (end < runs.size() && runs[end].block == runs[begin].block) ++end;
        std::vector<Run> segment(std::make_move_iterator(runs.begin() + begin),
                                 std::make_move_iterator(runs.begin() + end));
        shuffle(segment, rng);
        std::move(segment.begin(), segment.end(), runs.begin() + begin);
        begin = end;
    }
}

}  // namespace

std::string_view to_string(RunStatus status) {
    switch (status) {
        case RunStatus::pending: return "pending";
        case RunStatus::done: return "done";
        case RunStatus::failed: return "failed";
    }
    return "pending";
}

const std::string& Run::treatment(std::string_view factor) const {
    static const std::string none;
    for (const auto& [f, t] : treatments)
        if (f == factor) return t;
    return none;
}

std::size_t RunTable::trial_count() const {
    std::unordered_set<std::string> keys;
    for (const auto& r : runs) keys.insert(r.trial_key);
    return keys.size();
}

const Run* RunTable::find(std::string_view run_id) const {
    for (const auto& r : runs)
        if (r.run_id == run_id) return &r;
    return nullptr;
}

Run* RunTable::find(std::string_view run_id) {
    for (auto& r : runs)
        if (r.run_id == run_id) return &r;
    return nullptr;
}

Fraction Fraction::parse(std::string_view text) {
    const auto fail = [&] { return DomainError("fraction '" + std::string(text) + "' is not in (0, 1]"); };
    Fraction f;
    if (const auto slash = text.find('/'); slash != std::string_view::npos) {
        const auto num = text.substr(0, slash);
        const auto den = text.substr(slash + 1);
        if (std::from_chars(num.data(), num.data() + num.size(), f.numerator).ptr != num.data() + num.size() ||
            std::from_chars(den.data(), den.data() + den.size(), f.denominator).ptr != den.data() + den.size() ||
            num.empty() || den.empty())
            throw fail();
    } else {
        // Decimal literal, read digit by digit so 0.1 is exactly 1/10.
        const auto dot = text.find('.');
        const auto whole = text.substr(0, dot);
        const auto frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
        if (whole.empty() && frac.empty()) throw fail();
        if (frac.size() > 18) throw fail();
        std::uint64_t w = 0;
        std::uint64_t d = 0;
        if (!whole.empty() &&
            std::from_chars(whole.data(), whole.data() + whole.size(), w).ptr != whole.data() + whole.size())
            throw fail();
        if (!frac.empty() &&
            std::from_chars(frac.data(), frac.data() + frac.size(), d).ptr != frac.data() + frac.size())
            throw fail();
        std::uint64_t scale = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
        if (w > 1) throw fail();
        f.numerator = w * scale + d;
        f.denominator = scale;
    }
    if (f.denominator == 0 || f.numerator == 0 || f.numerator > f.denominator) throw fail();
    const auto g = std::gcd(f.numerator, f.denominator);
    f.numerator /= g;
    f.denominator /= g;
    return f;
}

std::string Fraction::str() const {
    return std::to_string(numerator) + "/" + std::to_string(denominator);
}

std::string order_digest(const std::vector<Run>& runs) {
    std::uint64_t h = fnv1a("");
    for (const auto& r : runs) {
        h = fnv1a(r.run_id, h);
        h = fnv1a("\n", h);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t count_runs(const ExperimentDefinition& def) {
    const auto cap = def.policy.max_runs;
    std::uint64_t n = checked_mul(1, def.subjects.size(), cap);
    for (const Factor* f : def.design_factors()) n = checked_mul(n, f->treatments.size(), cap);
    n = checked_mul(n, static_cast<std::uint64_t>(std::max<std::int64_t>(def.repetitions, 0)), cap);
    if (n > cap) throw OverflowError("run table exceeds the cap of " + std::to_string(cap) + " runs");
    return n;
}

RunTable cross_product(const ExperimentDefinition& def) {
    const auto total = count_runs(def);
    const auto design = def.design_factors();
    const Factor* block = def.blocking_factor();

    // Blocking factor goes outermost so blocks are contiguous in canonical order.
    std::vector<const Factor*> order;
    if (block) order.push_back(block);
    for (const Factor* f : design)
        if (f != block) order.push_back(f);

    RunTable table;
    table.seed = def.seed;
    for (const Factor* f : design) table.factors.push_back(f->name);
    for (const auto* m : def.dependent_metrics()) table.metrics.push_back(m->name);
    table.runs.reserve(total);
    if (total == 0) {
        table.order_digest = order_digest(table.runs);
        return table;
    }

    std::size_t combos = 1;
    for (std::size_t k = block ? 1 : 0; k < order.size(); ++k) combos *= order[k]->treatments.size();

    const std::size_t block_count = block ? block->treatments.size() : 1;
    std::vector<std::size_t> digits(order.size(), 0);
    std::size_t index = 0;
    for (std::size_t b = 0; b < block_count; ++b) {
        for (const auto& subject : def.subjects) {
            for (std::size_t c = 0; c < combos; ++c) {
                // Mixed-radix decode, last factor varies fastest.
                std::size_t rest = c;
                for (std::size_t k = order.size(); k-- > (block ? 1 : 0);) {
                    digits[k] = rest % order[k]->treatments.size();
                    rest /= order[k]->treatments.size();
                }
                if (block) digits[0] = b;

                std::vector<std::pair<std::string, std::string>> chosen;
                for (const Factor* f : design) {
                    const auto pos = static_cast<std::size_t>(std::find(order.begin(), order.end(), f) - order.begin());
                    chosen.emplace_back(f->name, f->treatments[digits[pos]].name);
                }
                std::string key = "subject=" + subject.name;
                std::string joined;
                for (const auto& [factor, treatment] : chosen) {
                    key += "|" + factor + "=" + treatment;
                    if (!joined.empty()) joined += '-';
                    joined += treatment;
                }
                for (std::int64_t rep = 1; rep <= def.repetitions; ++rep) {
                    Run run;
                    run.canonical_index = index;
                    run.run_id = "r" + std::to_string(index + 1) + "_" + subject.name + "_" + joined;
                    run.trial_key = key;
                    run.subject = subject.name;
                    run.treatments = chosen;
                    run.repetition = rep;
                    if (block) run.block = block->treatments[b].name;
                    table.runs.push_back(std::move(run));
                    ++index;
                }
            }
        }
    }
    table.order_digest = order_digest(table.runs);
    return table;
}

RunTable generate_run_table(const ExperimentDefinition& def) {
    RunTable table = cross_product(def);
    SplitMix64 rng(def.seed);
    shuffle_within_blocks(table.runs, rng);
    table.order_digest = order_digest(table.runs);
    return table;
}

RunTable apply_fraction(const RunTable& table, Fraction fraction, std::uint64_t seed) {
    if (fraction.denominator == 0 || fraction.numerator == 0 || fraction.numerator > fraction.denominator)
        throw DomainError("fraction must be in (0, 1]");

    // Trials in canonical order, independent of the input's run order.
    std::vector<const Run*> by_canonical;
    by_canonical.reserve(table.runs.size());
    for (const auto& r : table.runs) by_canonical.push_back(&r);
    std::sort(by_canonical.begin(), by_canonical.end(),
              [](const Run* a, const Run* b) { return a->canonical_index < b->canonical_index; });
    std::vector<std::string> trials;
    std::unordered_set<std::string> seen;
    for (const Run* r : by_canonical)
        if (seen.insert(r->trial_key).second) trials.push_back(r->trial_key);

    SplitMix64 pick(seed);
    shuffle(trials, pick);
    const auto t = static_cast<std::uint64_t>(trials.size());
    // ceil(t * num / den) without floating point.
    const auto keep = static_cast<std::size_t>((t * fraction.numerator + fraction.denominator - 1) / fraction.denominator);
    const std::unordered_set<std::string> kept(trials.begin(), trials.begin() + static_cast<std::ptrdiff_t>(keep));

    RunTable out;
    out.seed = seed;
    out.factors = table.factors;
    out.metrics = table.metrics;
    for (const Run* r : by_canonical)
        if (kept.count(r->trial_key)) out.runs.push_back(*r);
    SplitMix64 order(seed ^ kOrderStream);
    shuffle_within_blocks(out.runs, order);
    out.order_digest = order_digest(out.runs);
    return out;
}

Seconds estimate_duration(std::size_t run_count, Seconds per_run, Seconds cooldown) {
    if (per_run.count() < 0 || cooldown.count() < 0)
        throw DomainError("per-run time and cooldown must be non-negative");
    if (run_count == 0) return Seconds{0.0};
    const auto n = static_cast<double>(run_count);
    return Seconds{n * per_run.count() + (n - 1.0) * cooldown.count()};
}

Seconds estimate_duration(const RunTable& table, Seconds per_run, Seconds cooldown) {
    return estimate_duration(table.runs.size(), per_run, cooldown);
}

FeasibilityVerdict check_feasibility(Seconds total, Seconds budget) {
    if (total < budget) return {true, Seconds{0.0}};
    return {false, total - budget};
}

}  // namespace exr
