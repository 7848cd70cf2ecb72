#include "exr/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "exr/command_template.hpp"
#include "exr/errors.hpp"

namespace exr {

using nlohmann::json;

const Treatment* Factor::find_treatment(std::string_view treatment) const {
    for (const auto& t : treatments)
        if (t.name == treatment) return &t;
    return nullptr;
}

const Factor* ExperimentDefinition::find_factor(std::string_view factor) const {
    for (const auto& f : factors)
        if (f.name == factor) return &f;
    return nullptr;
}

const MetricSpec* ExperimentDefinition::find_metric(std::string_view metric) const {
    for (const auto& m : metrics)
        if (m.name == metric) return &m;
    return nullptr;
}

const Subject* ExperimentDefinition::find_subject(std::string_view subject) const {
    for (const auto& s : subjects)
        if (s.name == subject) return &s;
    return nullptr;
}

std::vector<const Factor*> ExperimentDefinition::design_factors() const {
    std::vector<const Factor*> out;
    for (const auto& f : factors)
        if (f.expands()) out.push_back(&f);
    return out;
}

const Factor* ExperimentDefinition::blocking_factor() const {
    for (const auto& f : factors)
        if (f.kind == FactorKind::blocking) return &f;
    return nullptr;
}

std::vector<const MetricSpec*> ExperimentDefinition::dependent_metrics() const {
    std::vector<const MetricSpec*> out;
    for (const auto& m : metrics)
        if (m.role == MetricRole::dependent) out.push_back(&m);
    return out;
}

const std::vector<std::string>& hook_event_names() {
    static const std::vector<std::string> names{
        "before_experiment", "before_run", "start_measurement", "interact",
        "stop_measurement",  "after_run",  "after_experiment"};
    return names;
}

const std::vector<std::string>& builtin_template_variables() {
    static const std::vector<std::string> names{"run_id", "subject", "repetition", "output_dir", "seed"};
    return names;
}

bool is_identifier(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_' || c == '-' || c == '.';
    });
}

bool is_parameter_key(std::string_view s) {
    if (s.empty()) return false;
    if (!(std::isalpha(static_cast<unsigned char>(s.front())) || s.front() == '_')) return false;
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isalnum(c) || c == '_'; });
}

std::string_view to_string(FactorKind kind) {
    switch (kind) {
        case FactorKind::main: return "main";
        case FactorKind::co_factor: return "co_factor";
        case FactorKind::blocking: return "blocking";
        case FactorKind::fixed: return "fixed";
    }
    return "main";
}

std::string_view to_string(Aggregation aggregation) {
    switch (aggregation) {
        case Aggregation::sum: return "sum";
        case Aggregation::mean: return "mean";
        case Aggregation::max: return "max";
        case Aggregation::last: return "last";
    }
    return "mean";
}

std::string_view to_string(MetricRole role) {
    return role == MetricRole::dependent ? "dependent" : "diagnostic";
}

std::string_view to_string(Direction direction) {
    switch (direction) {
        case Direction::two_sided: return "two_sided";
        case Direction::a_less: return "a_less";
        case Direction::a_greater: return "a_greater";
    }
    return "two_sided";
}

std::string_view to_string(Mode mode) {
    return mode == Mode::automatic ? "automatic" : "semi_automatic";
}

std::string to_string(const MetricUnit& unit) {
    switch (unit.kind) {
        case UnitKind::joule: return "joule";
        case UnitKind::watt: return "watt";
        case UnitKind::second: return "second";
        case UnitKind::percent: return "percent";
        case UnitKind::byte: return "byte";
        case UnitKind::count: return "count";
        case UnitKind::custom: return unit.custom;
    }
    return unit.custom;
}

namespace {

// Schema-checked accessors over one JSON object. `path` is a dotted location
// used in error messages, e.g. "factors[1].treatments[0]".
class ObjectReader {
public:
    ObjectReader(const json& object, std::string path, std::initializer_list<const char*> allowed)
        : object_(object), path_(std::move(path)) {
        if (!object_.is_object()) throw SchemaError(path_ + ": expected an object");
        for (const auto& [key, value] : object_.items()) {
            const bool known = std::any_of(allowed.begin(), allowed.end(),
                                           [&](const char* a) { return key == a; });
            if (!known) throw UnknownFieldError(path_, key);
        }
    }

    bool has(const char* key) const { return object_.contains(key); }
    const json& at(const char* key) const { return object_.at(key); }
    std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    std::string string(const char* key, std::optional<std::string> fallback = std::nullopt) const {
        if (!has(key)) return require(key, std::move(fallback));
        const auto& v = at(key);
        if (!v.is_string()) throw SchemaError(child(key) + ": expected a string");
        return v.get<std::string>();
    }

    double number(const char* key, double fallback) const {
        if (!has(key)) return fallback;
        const auto& v = at(key);
        if (!v.is_number()) throw SchemaError(child(key) + ": expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw SchemaError(child(key) + ": expected a finite number");
        return d;
    }

    std::int64_t integer(const char* key, std::int64_t fallback) const {
        if (!has(key)) return fallback;
        const auto& v = at(key);
        if (!v.is_number_integer()) throw SchemaError(child(key) + ": expected an integer");
        if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
            throw SchemaError(child(key) + ": integer out of range");
        return v.get<std::int64_t>();
    }

    std::uint64_t unsigned_integer(const char* key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const auto& v = at(key);
        if (!v.is_number_unsigned()) throw SchemaError(child(key) + ": expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    const json& array(const char* key) const {
        static const json empty = json::array();
        if (!has(key)) return empty;
        const auto& v = at(key);
        if (!v.is_array()) throw SchemaError(child(key) + ": expected an array");
        return v;
    }

private:
    std::string require(const char* key, std::optional<std::string> fallback) const {
        if (fallback) return *fallback;
        throw SchemaError(child(key) + ": required field missing");
    }

    const json& object_;
    std::string path_;
};

std::string indexed(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
}

// Settings and treatment parameters are string-valued; scalars are accepted
// and stored as their JSON text.
std::map<std::string, std::string> string_map(const json& v, const std::string& path) {
    if (!v.is_object()) throw SchemaError(path + ": expected an object");
    std::map<std::string, std::string> out;
    for (const auto& [key, value] : v.items()) {
        if (value.is_string())
            out[key] = value.get<std::string>();
        else if (value.is_number() || value.is_boolean())
            out[key] = value.dump();
        else
            throw SchemaError(path + "." + key + ": expected a string value");
    }
    return out;
}

FactorKind parse_factor_kind(const std::string& s, const std::string& path) {
    if (s == "main") return FactorKind::main;
    if (s == "co_factor" || s == "co-factor" || s == "cofactor") return FactorKind::co_factor;
    if (s == "blocking") return FactorKind::blocking;
    if (s == "fixed") return FactorKind::fixed;
    throw SchemaError(path + ": unknown factor kind '" + s + "'");
}

MetricUnit parse_unit(const std::string& s) {
    static const std::map<std::string, UnitKind> known{
        {"joule", UnitKind::joule},     {"watt", UnitKind::watt},   {"second", UnitKind::second},
        {"percent", UnitKind::percent}, {"byte", UnitKind::byte},   {"count", UnitKind::count}};
    const auto it = known.find(s);
    if (it != known.end()) return {it->second, {}};
    return {UnitKind::custom, s};
}

Aggregation parse_aggregation(const std::string& s, const std::string& path) {
    if (s == "sum") return Aggregation::sum;
    if (s == "mean") return Aggregation::mean;
    if (s == "max") return Aggregation::max;
    if (s == "last") return Aggregation::last;
    throw SchemaError(path + ": unknown aggregation '" + s + "'");
}

MetricRole parse_role(const std::string& s, const std::string& path) {
    if (s == "dependent") return MetricRole::dependent;
    if (s == "diagnostic") return MetricRole::diagnostic;
    throw SchemaError(path + ": unknown metric role '" + s + "'");
}

Direction parse_direction(const std::string& s, const std::string& path) {
    if (s == "two_sided") return Direction::two_sided;
    if (s == "a_less") return Direction::a_less;
    if (s == "a_greater") return Direction::a_greater;
    throw SchemaError(path + ": unknown direction '" + s + "'");
}

Mode parse_mode(const std::string& s, const std::string& path) {
    if (s == "automatic") return Mode::automatic;
    if (s == "semi_automatic" || s == "semi-automatic") return Mode::semi_automatic;
    throw SchemaError(path + ": unknown mode '" + s + "'");
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

// Names referenced from hypotheses and the GQM header must exist.
void check_references(const ExperimentDefinition& def) {
    for (const auto& m : def.gqm.metrics)
        if (!def.find_metric(m))
            throw ReferenceError("gqm.metrics: metric '" + m + "' is not defined in metrics");
    for (const auto& h : def.hypotheses) {
        if (!def.find_metric(h.metric))
            throw ReferenceError("hypothesis '" + h.id + "': metric '" + h.metric + "' is not defined");
        const Factor* f = def.find_factor(h.factor);
        if (!f) throw ReferenceError("hypothesis '" + h.id + "': factor '" + h.factor + "' is not defined");
        for (const auto* t : {&h.treatment_a, &h.treatment_b})
            if (!f->find_treatment(*t))
                throw ReferenceError("hypothesis '" + h.id + "': factor '" + h.factor +
                                     "' has no treatment '" + *t + "'");
    }
}

}  // namespace

ExperimentDefinition parse_definition(std::string_view document) {
    json root;
    try {
        root = json::parse(document.begin(), document.end());
    } catch (const json::parse_error& e) {
        const auto [line, column] = line_column(document, e.byte);
        throw SyntaxError("config syntax error", line, column);
    }

    const ObjectReader top(root, "",
                           {"name", "gqm", "factors", "subjects", "metrics", "hypotheses",
                            "repetitions", "cooldown_s", "estimated_run_time_s", "mode", "seed",
                            "profilers", "hooks", "output_dir", "policy"});
    ExperimentDefinition def;
    def.name = top.string("name");

    if (top.has("gqm")) {
        const ObjectReader gqm(top.at("gqm"), "gqm", {"goal", "questions", "metrics"});
        def.gqm.goal_statement = gqm.string("goal", "");
        for (const auto& q : gqm.array("questions")) {
            if (!q.is_string()) throw SchemaError("gqm.questions: expected strings");
            def.gqm.research_questions.push_back(q.get<std::string>());
        }
        for (const auto& m : gqm.array("metrics")) {
            if (!m.is_string()) throw SchemaError("gqm.metrics: expected strings");
            def.gqm.metrics.push_back(m.get<std::string>());
        }
    }

    const auto& factors = top.array("factors");
    for (std::size_t i = 0; i < factors.size(); ++i) {
        const auto path = indexed("factors", i);
        const ObjectReader r(factors[i], path, {"name", "kind", "treatments"});
        Factor f;
        f.name = r.string("name");
        f.kind = parse_factor_kind(r.string("kind", "main"), r.child("kind"));
        const auto& treatments = r.array("treatments");
        for (std::size_t j = 0; j < treatments.size(); ++j) {
            const auto tpath = indexed(r.child("treatments"), j);
            Treatment t;
            if (treatments[j].is_string()) {
                t.name = treatments[j].get<std::string>();
            } else {
                const ObjectReader tr(treatments[j], tpath, {"name", "params"});
                t.name = tr.string("name");
                if (tr.has("params")) t.parameters = string_map(tr.at("params"), tr.child("params"));
            }
            f.treatments.push_back(std::move(t));
        }
        def.factors.push_back(std::move(f));
    }

    const auto& subjects = top.array("subjects");
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        const ObjectReader r(subjects[i], indexed("subjects", i), {"name", "command", "dir", "timeout_s"});
        Subject s;
        s.name = r.string("name");
        s.command_template = r.string("command");
        s.working_dir = r.string("dir", ".");
        s.timeout = Seconds(r.number("timeout_s", 600.0));
        def.subjects.push_back(std::move(s));
    }

    const auto& metrics = top.array("metrics");
    for (std::size_t i = 0; i < metrics.size(); ++i) {
        const ObjectReader r(metrics[i], indexed("metrics", i), {"name", "unit", "aggregation", "role"});
        MetricSpec m;
        m.name = r.string("name");
        m.unit = parse_unit(r.string("unit", "count"));
        const auto default_aggregation = m.unit.kind == UnitKind::joule ? "sum" : "mean";
        m.aggregation = parse_aggregation(r.string("aggregation", default_aggregation), r.child("aggregation"));
        m.role = parse_role(r.string("role", "dependent"), r.child("role"));
        def.metrics.push_back(std::move(m));
    }

    const auto& hypotheses = top.array("hypotheses");
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        const ObjectReader r(hypotheses[i], indexed("hypotheses", i),
                             {"id", "metric", "factor", "treatment_a", "treatment_b", "direction", "question"});
        Hypothesis h;
        h.id = r.string("id");
        h.metric = r.string("metric");
        h.factor = r.string("factor");
        h.treatment_a = r.string("treatment_a");
        h.treatment_b = r.string("treatment_b");
        h.direction = parse_direction(r.string("direction", "two_sided"), r.child("direction"));
        if (r.has("question")) h.question = static_cast<int>(r.integer("question", 0));
        def.hypotheses.push_back(std::move(h));
    }

    def.repetitions = top.integer("repetitions", 1);
    def.cooldown = Seconds(top.number("cooldown_s", 30.0));
    double slowest = 0.0;
    for (const auto& s : def.subjects) slowest = std::max(slowest, s.timeout.count());
    def.estimated_run_time = Seconds(top.number("estimated_run_time_s", slowest > 0 ? slowest : 600.0));
    def.mode = parse_mode(top.string("mode", "automatic"), "mode");
    def.seed = top.unsigned_integer("seed", 0);

    const auto& profilers = top.array("profilers");
    for (std::size_t i = 0; i < profilers.size(); ++i) {
        const ObjectReader r(profilers[i], indexed("profilers", i), {"name", "settings"});
        ProfilerConfig p;
        p.name = r.string("name");
        if (r.has("settings")) p.settings = string_map(r.at("settings"), r.child("settings"));
        def.profilers.push_back(std::move(p));
    }

    if (top.has("hooks")) {
        const auto& hooks = top.at("hooks");
        if (!hooks.is_object()) throw SchemaError("hooks: expected an object");
        for (const auto& [event, path] : hooks.items()) {
            const auto& names = hook_event_names();
            if (std::find(names.begin(), names.end(), event) == names.end())
                throw UnknownFieldError("hooks", event);
            if (!path.is_string()) throw SchemaError("hooks." + event + ": expected a path string");
            def.hooks[event] = path.get<std::string>();
        }
    }

    def.output_dir = top.string("output_dir", "results");

    if (top.has("policy")) {
        const ObjectReader r(top.at("policy"), "policy",
                             {"max_retries", "max_failed_fraction", "alpha", "budget_h", "max_runs"});
        def.policy.max_retries = static_cast<int>(r.integer("max_retries", def.policy.max_retries));
        def.policy.max_failed_fraction = r.number("max_failed_fraction", def.policy.max_failed_fraction);
        def.policy.alpha = r.number("alpha", def.policy.alpha);
        def.policy.budget = Seconds(r.number("budget_h", def.policy.budget.count() / 3600.0) * 3600.0);
        def.policy.max_runs = r.unsigned_integer("max_runs", def.policy.max_runs);
    }

    check_references(def);
    return def;
}

ExperimentDefinition load_definition(const std::filesystem::path& config_path) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw Error("cannot open config file " + config_path.string());
    std::ostringstream text;
    text << in.rdbuf();
    auto def = parse_definition(text.str());

    const auto base = std::filesystem::absolute(config_path).parent_path();
    const auto resolve = [&](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative())
            p = (base / p).lexically_normal().string();
    };
    resolve(def.output_dir);
    for (auto& s : def.subjects) resolve(s.working_dir);
    for (auto& [event, path] : def.hooks) resolve(path);
    return def;
}

std::string serialize_definition(const ExperimentDefinition& def) {
    json root;
    root["name"] = def.name;
    root["gqm"] = {{"goal", def.gqm.goal_statement},
                   {"questions", def.gqm.research_questions},
                   {"metrics", def.gqm.metrics}};

    root["factors"] = json::array();
    for (const auto& f : def.factors) {
        json treatments = json::array();
        for (const auto& t : f.treatments) treatments.push_back({{"name", t.name}, {"params", t.parameters}});
        root["factors"].push_back({{"name", f.name}, {"kind", to_string(f.kind)}, {"treatments", treatments}});
    }

    root["subjects"] = json::array();
    for (const auto& s : def.subjects)
        root["subjects"].push_back({{"name", s.name},
                                    {"command", s.command_template},
                                    {"dir", s.working_dir},
                                    {"timeout_s", s.timeout.count()}});

    root["metrics"] = json::array();
    for (const auto& m : def.metrics)
        root["metrics"].push_back({{"name", m.name},
                                   {"unit", to_string(m.unit)},
                                   {"aggregation", to_string(m.aggregation)},
                                   {"role", to_string(m.role)}});

    root["hypotheses"] = json::array();
    for (const auto& h : def.hypotheses) {
        json j{{"id", h.id},
               {"metric", h.metric},
               {"factor", h.factor},
               {"treatment_a", h.treatment_a},
               {"treatment_b", h.treatment_b},
               {"direction", to_string(h.direction)}};
        if (h.question) j["question"] = *h.question;
        root["hypotheses"].push_back(std::move(j));
    }

    root["repetitions"] = def.repetitions;
    root["cooldown_s"] = def.cooldown.count();
    root["estimated_run_time_s"] = def.estimated_run_time.count();
    root["mode"] = to_string(def.mode);
    root["seed"] = def.seed;

    root["profilers"] = json::array();
    for (const auto& p : def.profilers) root["profilers"].push_back({{"name", p.name}, {"settings", p.settings}});

    root["hooks"] = json::object();
    for (const auto& [event, path] : def.hooks) root["hooks"][event] = path;
    root["output_dir"] = def.output_dir;
    root["policy"] = {{"max_retries", def.policy.max_retries},
                      {"max_failed_fraction", def.policy.max_failed_fraction},
                      {"alpha", def.policy.alpha},
                      {"budget_h", def.policy.budget.count() / 3600.0},
                      {"max_runs", def.policy.max_runs}};
    return root.dump(2) + "\n";
}

bool ValidationReport::has_errors() const noexcept {
    return std::any_of(findings.begin(), findings.end(),
                       [](const Finding& f) { return f.severity == Severity::error; });
}

std::vector<std::string> ValidationReport::errors() const {
    std::vector<std::string> out;
    for (const auto& f : findings)
        if (f.severity == Severity::error) out.push_back(f.message);
    return out;
}

ValidationReport validate(const ExperimentDefinition& def) {
    ValidationReport report;
    const auto error = [&](std::string msg) { report.findings.push_back({Severity::error, std::move(msg)}); };
    const auto warning = [&](std::string msg) { report.findings.push_back({Severity::warning, std::move(msg)}); };

    if (!is_identifier(def.name)) error("name: must be a nonempty identifier");

    if (def.gqm.research_questions.empty()) error("gqm.questions: at least one research question is required");
    for (const auto& m : def.gqm.metrics)
        if (!def.find_metric(m)) error("gqm.metrics: metric '" + m + "' is not defined in metrics");

    if (def.repetitions < 1) error("repetitions must be >= 1");
    if (def.cooldown.count() < 0) error("cooldown_s must be >= 0");
    if (!(def.estimated_run_time.count() > 0)) error("estimated_run_time_s must be > 0");

    // Factors.
    std::set<std::string> factor_names;
    int main_count = 0;
    int blocking_count = 0;
    for (const auto& f : def.factors) {
        if (!is_identifier(f.name)) error("factor '" + f.name + "': name must be an identifier");
        if (!factor_names.insert(f.name).second) error("factor '" + f.name + "' is declared twice");
        if (f.kind == FactorKind::main) ++main_count;
        if (f.kind == FactorKind::blocking) ++blocking_count;
        if (f.treatments.empty()) error("factor '" + f.name + "': at least one treatment is required");
        if (f.kind == FactorKind::fixed && f.treatments.size() != 1)
            error("factor '" + f.name + "': a fixed factor has exactly one treatment");
        std::set<std::string> treatment_names;
        for (const auto& t : f.treatments) {
            if (!is_identifier(t.name))
                error("factor '" + f.name + "': treatment name '" + t.name + "' is not an identifier");
            if (!treatment_names.insert(t.name).second)
                error("factor '" + f.name + "': treatment '" + t.name + "' is declared twice");
            for (const auto& [key, value] : t.parameters)
                if (!is_parameter_key(key))
                    error("factor '" + f.name + "', treatment '" + t.name + "': parameter key '" + key +
                          "' is not a valid identifier token");
        }
    }
    if (main_count == 0) warning("factors: no main factor; runs differ only by subject");
    if (blocking_count > 1) error("factors: at most one blocking factor is allowed");

    // Subjects.
    if (def.subjects.empty()) error("subjects: at least one subject is required");
    std::set<std::string> subject_names;
    std::set<std::string> resolvable(builtin_template_variables().begin(), builtin_template_variables().end());
    for (const auto& f : def.factors)
        for (const auto& t : f.treatments)
            for (const auto& [key, value] : t.parameters) resolvable.insert(key);
    for (const auto& s : def.subjects) {
        if (!is_identifier(s.name)) error("subject '" + s.name + "': name must be an identifier");
        if (!subject_names.insert(s.name).second) error("subject '" + s.name + "' is declared twice");
        if (!(s.timeout.count() > 0)) error("subject '" + s.name + "': timeout_s must be > 0");
        if (s.command_template.empty()) error("subject '" + s.name + "': command is empty");
        for (const auto& key : placeholders(s.command_template))
            if (!resolvable.count(key))
                error("subject '" + s.name + "': placeholder {" + key +
                      "} is not a treatment parameter or built-in variable");
    }

    // Metrics.
    std::set<std::string> metric_names;
    for (const auto& m : def.metrics) {
        if (!is_identifier(m.name)) error("metric '" + m.name + "': name must be an identifier");
        if (!metric_names.insert(m.name).second) error("metric '" + m.name + "' is declared twice");
    }
    if (def.dependent_metrics().empty()) warning("metrics: no dependent metric is declared");

    // Hypotheses.
    std::set<std::string> hypothesis_ids;
    for (const auto& h : def.hypotheses) {
        const std::string where = "hypothesis '" + h.id + "'";
        if (!hypothesis_ids.insert(h.id).second) error(where + " is declared twice");
        if (!def.find_metric(h.metric)) error(where + ": metric '" + h.metric + "' is not defined");
        const Factor* f = def.find_factor(h.factor);
        if (!f) {
            error(where + ": factor '" + h.factor + "' is not defined");
        } else {
            if (!f->find_treatment(h.treatment_a)) error(where + ": unknown treatment '" + h.treatment_a + "'");
            if (!f->find_treatment(h.treatment_b)) error(where + ": unknown treatment '" + h.treatment_b + "'");
            if (!f->expands()) error(where + ": factor '" + h.factor + "' is fixed and has no contrast");
        }
        if (h.treatment_a == h.treatment_b) error(where + ": treatment_a and treatment_b must differ");
        if (h.question && (*h.question < 1 || *h.question > static_cast<int>(def.gqm.research_questions.size())))
            error(where + ": question index out of range");
    }
    if (def.hypotheses.size() > 5)
        warning("more than 5 hypotheses are tested without multiple-comparison correction");

    for (const auto& p : def.profilers)
        if (p.name.empty()) error("profilers: profiler name is empty");

    if (def.policy.max_retries < 0) error("policy.max_retries must be >= 0");
    if (def.policy.max_failed_fraction < 0 || def.policy.max_failed_fraction > 1)
        error("policy.max_failed_fraction must be within [0, 1]");
    if (!(def.policy.alpha > 0 && def.policy.alpha < 1)) error("policy.alpha must be within (0, 1)");
    if (!(def.policy.budget.count() > 0)) error("policy.budget_h must be > 0");
    if (def.policy.max_runs == 0) error("policy.max_runs must be > 0");
    if (def.output_dir.empty()) error("output_dir must not be empty");

    return report;
}

}  // namespace exr
