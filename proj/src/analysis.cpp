#include "exr/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "exr/errors.hpp"

namespace exr {
namespace {

using nlohmann::json;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string num(const std::optional<double>& v) {
    return v ? num(*v) : "-";
}

std::string pval(double p) {
    if (p < 1e-4) return "<0.0001";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", p);
    return buf;
}

std::vector<double> values_of(const ExperimentDefinition& def, const RunTable& table, const std::string& metric,
                              const std::string& factor, const std::string& treatment) {
    std::vector<double> out;
    for (const auto& run : table.runs) {
        if (run.status != RunStatus::done) continue;
        if (factor == "subject") {
            if (run.subject != treatment) continue;
        } else if (!factor.empty()) {
            const Factor* f = def.find_factor(factor);
            if (f && f->expands() && run.treatment(factor) != treatment) continue;
        }
        if (const auto it = run.measures.find(metric); it != run.measures.end()) out.push_back(it->second);
    }
    return out;
}

GroupStats group(std::string label, const std::vector<double>& values) {
    GroupStats g;
    g.label = std::move(label);
    g.stats = descriptive(values);
    return g;
}

void assess_normality(GroupStats& g, const std::vector<double>& values) {
    if (values.size() < 3) {
        g.normality_note = "n < 3, normality not assessed";
        return;
    }
    try {
        g.normality = shapiro_wilk(values);
    } catch (const Error& e) {
        g.normality_note = e.what();
    }
}

json descriptive_json(const Descriptive& d) {
    json j{{"n", d.n}, {"mean", d.mean}, {"median", d.median}, {"min", d.min},
           {"max", d.max}, {"q1", d.q1},   {"q3", d.q3}};
    j["sd"] = d.sd ? json(*d.sd) : json(nullptr);
    j["cv"] = d.cv ? json(*d.cv) : json(nullptr);
    return j;
}

json group_json(const GroupStats& g) {
    json j{{"label", g.label}, {"descriptive", descriptive_json(g.stats)}};
    if (g.normality)
        j["shapiro_wilk"] = {{"w", g.normality->w}, {"p", g.normality->p_value}};
    else
        j["shapiro_wilk"] = nullptr;
    if (!g.normality_note.empty()) j["normality_note"] = g.normality_note;
    return j;
}

json effect_json(const EffectSize& e) {
    return {{"method", to_string(e.method)}, {"value", e.value}, {"magnitude", to_string(e.magnitude)}};
}

std::string direction_text(const Hypothesis& h) {
    switch (h.direction) {
        case Direction::two_sided: return h.treatment_a + " != " + h.treatment_b;
        case Direction::a_less: return h.treatment_a + " < " + h.treatment_b;
        case Direction::a_greater: return h.treatment_a + " > " + h.treatment_b;
    }
    return {};
}

void descriptive_table(std::ostringstream& out, const MetricTable& t) {
    out << "| group | n | mean | sd | median | q1 | q3 | min | max | cv |\n";
    out << "|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& r : t.rows) {
        const auto& d = r.stats;
        out << "| " << r.label << " | " << d.n << " | " << num(d.mean) << " | " << num(d.sd) << " | " << num(d.median)
            << " | " << num(d.q1) << " | " << num(d.q3) << " | " << num(d.min) << " | " << num(d.max) << " | "
            << num(d.cv) << " |\n";
    }
}

void hypothesis_block(std::ostringstream& out, const HypothesisOutcome& h, const std::string& heading) {
    const auto& hy = h.hypothesis;
    out << heading << " " << hy.id << ": " << hy.metric << " by " << hy.factor << " (H1: " << direction_text(hy)
        << ")\n\n";
    out << "| group | n | mean | sd | median | Shapiro-Wilk W | p |\n";
    out << "|---|---:|---:|---:|---:|---:|---:|\n";
    for (const auto* g : {&h.a, &h.b}) {
        out << "| " << g->label << " | " << g->stats.n << " | " << num(g->stats.mean) << " | " << num(g->stats.sd)
            << " | " << num(g->stats.median) << " | "
            << (g->normality ? num(g->normality->w) : "-") << " | "
            << (g->normality ? pval(g->normality->p_value) : "-") << " |\n";
    }
    out << "\n";
    out << "- normality: " << (h.both_normal ? "both groups normal" : "not both normal") << "\n";
    out << "- test: " << h.test.test_name;
    if (!h.test.method.empty()) out << " (" << h.test.method << ")";
    out << ", statistic = " << num(h.test.statistic);
    if (h.test.df) out << ", df = " << num(*h.test.df);
    out << ", p " << (h.test.p_value < 1e-4 ? "" : "= ") << pval(h.test.p_value) << "\n";
    out << "- effect size: " << to_string(h.effect.method) << " = " << num(h.effect.value) << " ("
        << to_string(h.effect.magnitude) << ")\n";
    if (h.effect.method != EffectMethod::cliffs_delta)
        out << "- Cliff's delta: " << num(h.cliffs.value) << " (" << to_string(h.cliffs.magnitude) << ")\n";
    out << "- verdict: **" << to_string(h.test.decision) << "** H0 at alpha = " << num(h.test.alpha) << "\n\n";
}

}  // namespace

AnalysisReport analyze(const ExperimentDefinition& def, const RunTable& table) {
    AnalysisReport report;
    report.experiment = def.name;
    report.alpha = def.policy.alpha;
    report.total_runs = table.runs.size();
    for (const auto& run : table.runs) {
        switch (run.status) {
            case RunStatus::done: ++report.done_runs; break;
            case RunStatus::failed: ++report.failed_runs; break;
            default: ++report.pending_runs; break;
        }
    }
    if (report.done_runs == 0) throw InsufficientDataError("no completed runs to analyze");

    // Metric columns: definition order, plus anything else the table carries.
    std::vector<std::string> metrics;
    for (const auto& m : def.metrics) metrics.push_back(m.name);
    for (const auto& m : table.metrics)
        if (std::find(metrics.begin(), metrics.end(), m) == metrics.end()) metrics.push_back(m);

    for (const auto& metric : metrics) {
        MetricTable t;
        t.metric = metric;
        const MetricSpec* spec = def.find_metric(metric);
        t.unit = spec ? to_string(spec->unit) : "";
        const auto all = values_of(def, table, metric, "", "");
        if (all.empty()) continue;
        t.rows.push_back(group("all", all));
        for (const auto* f : def.design_factors())
            for (const auto& tr : f->treatments)
                if (auto v = values_of(def, table, metric, f->name, tr.name); !v.empty())
                    t.rows.push_back(group(f->name + "=" + tr.name, v));
        for (const auto& s : def.subjects)
            if (auto v = values_of(def, table, metric, "subject", s.name); !v.empty())
                t.rows.push_back(group("subject=" + s.name, v));

        if (spec && spec->unit.kind == UnitKind::joule) {
            std::size_t negative = 0;
            for (const double v : all) negative += v < 0.0;
            if (negative)
                report.flags.push_back(metric + ": " + std::to_string(negative) + " run(s) report negative energy");
        }
        report.metrics.push_back(std::move(t));
    }

    for (const auto* m : def.dependent_metrics()) {
        std::size_t missing = 0;
        for (const auto& run : table.runs)
            if (run.status == RunStatus::done && !run.measures.count(m->name)) ++missing;
        if (missing) report.flags.push_back(m->name + ": " + std::to_string(missing) + " done run(s) have no value");
    }
    if (report.failed_runs)
        report.flags.push_back(std::to_string(report.failed_runs) + " run(s) failed and are excluded");
    if (report.pending_runs)
        report.flags.push_back(std::to_string(report.pending_runs) + " run(s) are still pending; results are partial");
    if (def.hypotheses.size() > 5)
        report.flags.push_back(std::to_string(def.hypotheses.size()) +
                               " hypotheses tested without multiple-comparison correction");

    for (const auto& h : def.hypotheses) {
        const auto va = values_of(def, table, h.metric, h.factor, h.treatment_a);
        const auto vb = values_of(def, table, h.metric, h.factor, h.treatment_b);
        if (va.size() < 2 || vb.size() < 2)
            throw InsufficientDataError("hypothesis " + h.id + ": needs at least 2 done runs per group (have " +
                                        std::to_string(va.size()) + " for " + h.treatment_a + ", " +
                                        std::to_string(vb.size()) + " for " + h.treatment_b + ")");
        HypothesisOutcome o;
        o.hypothesis = h;
        o.a = group(h.factor + "=" + h.treatment_a, va);
        o.b = group(h.factor + "=" + h.treatment_b, vb);
        assess_normality(o.a, va);
        assess_normality(o.b, vb);
        o.both_normal = o.a.normality && o.b.normality && o.a.normality->p_value >= report.alpha &&
                        o.b.normality->p_value >= report.alpha;
        o.cliffs = cliffs_delta(va, vb);
        if (o.both_normal) {
            o.test = welch_t(va, vb, h.direction, report.alpha);
            o.effect = cohens_d(va, vb);
        } else {
            o.test = mann_whitney(va, vb, h.direction, report.alpha);
            o.effect = o.cliffs;
        }
        report.hypotheses.push_back(std::move(o));
    }

    for (std::size_t i = 0; i < metrics.size(); ++i) {
        for (std::size_t j = i + 1; j < metrics.size(); ++j) {
            CorrelationOutcome c;
            c.x = metrics[i];
            c.y = metrics[j];
            std::vector<double> xs, ys;
            for (const auto& run : table.runs) {
                if (run.status != RunStatus::done) continue;
                const auto xi = run.measures.find(c.x);
                const auto yi = run.measures.find(c.y);
                if (xi == run.measures.end() || yi == run.measures.end()) continue;
                xs.push_back(xi->second);
                ys.push_back(yi->second);
            }
            try {
                c.result = spearman(xs, ys);
            } catch (const StatisticsError& e) {
                c.note = e.what();
            }
            report.correlations.push_back(std::move(c));
        }
    }
    return report;
}

std::string analysis_to_json(const AnalysisReport& r) {
    json j;
    j["experiment"] = r.experiment;
    j["alpha"] = r.alpha;
    j["runs"] = {{"total", r.total_runs}, {"done", r.done_runs}, {"failed", r.failed_runs}, {"pending", r.pending_runs}};
    j["metrics"] = json::array();
    for (const auto& t : r.metrics) {
        json rows = json::array();
        for (const auto& g : t.rows) rows.push_back(group_json(g));
        j["metrics"].push_back({{"metric", t.metric}, {"unit", t.unit}, {"groups", rows}});
    }
    j["hypotheses"] = json::array();
    for (const auto& h : r.hypotheses) {
        json test{{"name", h.test.test_name},
                  {"statistic", h.test.statistic},
                  {"p_value", h.test.p_value},
                  {"alpha", h.test.alpha},
                  {"decision", to_string(h.test.decision)}};
        if (h.test.df) test["df"] = *h.test.df;
        if (!h.test.method.empty()) test["method"] = h.test.method;
        j["hypotheses"].push_back({{"id", h.hypothesis.id},
                                   {"metric", h.hypothesis.metric},
                                   {"factor", h.hypothesis.factor},
                                   {"treatment_a", h.hypothesis.treatment_a},
                                   {"treatment_b", h.hypothesis.treatment_b},
                                   {"direction", to_string(h.hypothesis.direction)},
                                   {"question", h.hypothesis.question ? json(*h.hypothesis.question) : json(nullptr)},
                                   {"group_a", group_json(h.a)},
                                   {"group_b", group_json(h.b)},
                                   {"both_normal", h.both_normal},
                                   {"test", test},
                                   {"effect_size", effect_json(h.effect)},
                                   {"cliffs_delta", effect_json(h.cliffs)}});
    }
    j["correlations"] = json::array();
    for (const auto& c : r.correlations) {
        json e{{"x", c.x}, {"y", c.y}};
        if (c.result) {
            e["method"] = "spearman";
            e["rho"] = c.result->rho;
            e["p_value"] = c.result->p_value;
            e["n"] = c.result->n;
        } else {
            e["note"] = c.note;
        }
        j["correlations"].push_back(e);
    }
    j["flags"] = r.flags;
    return j.dump(2) + "\n";
}

std::string analysis_to_markdown(const AnalysisReport& r) {
    std::ostringstream out;
    out << "# Analysis: " << r.experiment << "\n\n";
    out << "Runs: " << r.done_runs << " done, " << r.failed_runs << " failed, " << r.pending_runs << " pending (total "
        << r.total_runs << "). alpha = " << num(r.alpha) << ".\n\n";
    out << "## Descriptive statistics\n\n";
    for (const auto& t : r.metrics) {
        out << "### " << t.metric << (t.unit.empty() ? "" : " [" + t.unit + "]") << "\n\n";
        descriptive_table(out, t);
        out << "\n";
    }
    out << "## Hypotheses\n\n";
    if (r.hypotheses.empty()) out << "No hypotheses defined.\n\n";
    for (const auto& h : r.hypotheses) hypothesis_block(out, h, "###");
    out << "## Correlations (Spearman)\n\n";
    if (r.correlations.empty()) {
        out << "Fewer than two metrics; nothing to correlate.\n\n";
    } else {
        out << "| x | y | n | rho | p |\n|---|---|---:|---:|---:|\n";
        for (const auto& c : r.correlations) {
            if (c.result)
                out << "| " << c.x << " | " << c.y << " | " << c.result->n << " | " << num(c.result->rho) << " | "
                    << pval(c.result->p_value) << " |\n";
            else
                out << "| " << c.x << " | " << c.y << " | - | - | " << c.note << " |\n";
        }
        out << "\n";
    }
    out << "## Data sanity\n\n";
    if (r.flags.empty()) out << "No issues found.\n";
    for (const auto& f : r.flags) out << "- " << f << "\n";
    return out.str();
}

std::string render_report(const ExperimentDefinition& def, const RunTable& table, const AnalysisReport& r) {
    std::ostringstream out;
    out << "# " << def.name << "\n\n";
    out << "## Goal\n\n" << (def.gqm.goal_statement.empty() ? "(no goal stated)" : def.gqm.goal_statement) << "\n\n";
    if (!def.gqm.research_questions.empty()) {
        out << "Research questions:\n\n";
        for (std::size_t i = 0; i < def.gqm.research_questions.size(); ++i)
            out << i + 1 << ". " << def.gqm.research_questions[i] << "\n";
        out << "\n";
    }
    if (!def.gqm.metrics.empty()) {
        out << "Metrics: ";
        for (std::size_t i = 0; i < def.gqm.metrics.size(); ++i) out << (i ? ", " : "") << def.gqm.metrics[i];
        out << "\n\n";
    }

    out << "## Experiment design\n\n";
    out << "| factor | kind | treatments |\n|---|---|---|\n";
    for (const auto& f : def.factors) {
        out << "| " << f.name << " | " << to_string(f.kind) << " | ";
        for (std::size_t i = 0; i < f.treatments.size(); ++i) out << (i ? ", " : "") << f.treatments[i].name;
        out << " |\n";
    }
    out << "\n";
    out << "- subjects: ";
    for (std::size_t i = 0; i < def.subjects.size(); ++i) out << (i ? ", " : "") << def.subjects[i].name;
    out << "\n- repetitions: " << def.repetitions << "\n";
    out << "- runs: " << table.runs.size() << " (" << table.trial_count() << " trials), randomized with seed "
        << def.seed << "\n";
    out << "- order digest: " << table.order_digest << "\n";
    out << "- cooldown: " << num(def.cooldown.count()) << " s, mode: " << to_string(def.mode) << "\n";
    out << "- executed: " << r.done_runs << " done, " << r.failed_runs << " failed, " << r.pending_runs
        << " pending\n\n";

    out << "## Results\n\n";
    for (const auto& t : r.metrics) {
        out << "### " << t.metric << (t.unit.empty() ? "" : " [" + t.unit + "]") << "\n\n";
        descriptive_table(out, t);
        out << "\n";
    }

    const auto& questions = def.gqm.research_questions;
    for (std::size_t q = 0; q < questions.size(); ++q) {
        out << "## RQ" << q + 1 << ": " << questions[q] << "\n\n";
        bool any = false;
        for (const auto& h : r.hypotheses) {
            if (h.hypothesis.question != static_cast<int>(q + 1)) continue;
            hypothesis_block(out, h, "###");
            any = true;
        }
        if (!any) out << "No hypothesis is linked to this question; see the descriptive results above.\n\n";
    }
    std::vector<const HypothesisOutcome*> unlinked;
    for (const auto& h : r.hypotheses)
        if (!h.hypothesis.question || *h.hypothesis.question < 1 ||
            *h.hypothesis.question > static_cast<int>(questions.size()))
            unlinked.push_back(&h);
    if (!unlinked.empty()) {
        out << "## Other hypotheses\n\n";
        for (const auto* h : unlinked) hypothesis_block(out, *h, "###");
    }

    if (!r.correlations.empty()) {
        out << "## Correlations\n\n| x | y | n | Spearman rho | p |\n|---|---|---:|---:|---:|\n";
        for (const auto& c : r.correlations) {
            if (c.result)
                out << "| " << c.x << " | " << c.y << " | " << c.result->n << " | " << num(c.result->rho) << " | "
                    << pval(c.result->p_value) << " |\n";
            else
                out << "| " << c.x << " | " << c.y << " | - | - | " << c.note << " |\n";
        }
        out << "\n";
    }

    out << "## Data sanity\n\n";
    if (r.flags.empty()) out << "No issues found.\n";
    for (const auto& f : r.flags) out << "- " << f << "\n";
    return out.str();
}

}  // namespace exr
