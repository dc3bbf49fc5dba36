#include "dmc/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dmc/error.hpp"

namespace dmc {

using nlohmann::json;

namespace {

/// Reads one JSON object, remembering which keys were consumed so leftovers
/// can be reported as unknown fields.
class ObjectReader {
public:
    ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(where() + "expected an object");
    }

    bool has(const std::string& key) const { return obj_.contains(key); }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return obj_.at(key);
    }

    void number(const std::string& key, double& out) {
        if (!has(key)) return;
        const auto& v = raw(key);
        if (!v.is_number()) throw ConfigError(field(key) + "expected a number");
        out = v.get<double>();
        if (!std::isfinite(out)) throw ConfigError(field(key) + "must be finite");
    }

    template <class Int>
    void integer(const std::string& key, Int& out) {
        if (!has(key)) return;
        const auto& v = raw(key);
        if (!v.is_number_integer()) throw ConfigError(field(key) + "expected an integer");
        if (std::is_unsigned_v<Int> && v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
            throw ConfigError(field(key) + "must be non-negative");
        }
        out = v.get<Int>();
    }

    void string(const std::string& key, std::string& out) {
        if (!has(key)) return;
        const auto& v = raw(key);
        if (!v.is_string()) throw ConfigError(field(key) + "expected a string");
        out = v.get<std::string>();
    }

    void strings(const std::string& key, std::vector<std::string>& out) {
        if (!has(key)) return;
        const auto& v = raw(key);
        if (!v.is_array()) throw ConfigError(field(key) + "expected an array of strings");
        out.clear();
        for (const auto& item : v) {
            if (!item.is_string()) throw ConfigError(field(key) + "expected an array of strings");
            out.push_back(item.get<std::string>());
        }
    }

    void number_map(const std::string& key, std::map<std::string, double>& out) {
        if (!has(key)) return;
        ObjectReader sub(raw(key), child(key));
        out.clear();
        for (const auto& [name, value] : sub.obj_.items()) sub.number(name, out[name]);
    }

    ObjectReader object(const std::string& key) { return ObjectReader(raw(key), child(key)); }

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    std::string field(const std::string& key) const { return "field '" + child(key) + "': "; }

    /// Throws on the first key that was never read.
    void finish() const {
        for (const auto& [key, value] : obj_.items()) {
            if (!seen_.count(key)) throw ConfigError("field '" + child(key) + "': unknown field");
        }
    }

private:
    std::string where() const { return path_.empty() ? "config: " : "field '" + path_ + "': "; }

    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class F>
auto rethrow_as_config(const std::string& field, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError("field '" + field + "': " + e.what());
    }
}

void read_uncertainty(ObjectReader r, UncertaintySpec& u) {
    r.number("level", u.level);
    r.strings("ic_targets", u.ic_targets);
    r.strings("param_targets", u.param_targets);
    if (r.has("distribution")) {
        std::string dist;
        r.string("distribution", dist);
        if (dist != "gaussian") throw ConfigError(r.field("distribution") + "only 'gaussian' is supported");
    }
    r.integer("resample_attempts", u.resample_attempts);
    r.finish();
}

void read_train(ObjectReader r, TrainConfig& t) {
    r.integer("epochs_max", t.epochs_max);
    r.integer("episodes_per_epoch", t.episodes_per_epoch);
    r.number("learning_rate", t.learning_rate);
    r.integer("patience", t.patience);
    r.number("eps_mach", t.eps_mach);
    r.integer("seed", t.seed);
    r.integer("workers", t.workers);
    if (r.has("optimizer")) {
        auto o = r.object("optimizer");
        if (o.has("kind")) {
            std::string kind;
            o.string("kind", kind);
            t.optimizer.kind = rethrow_as_config(o.child("kind"), [&] { return parse_optimizer_kind(kind); });
        }
        o.number("beta1", t.optimizer.beta1);
        o.number("beta2", t.optimizer.beta2);
        o.number("epsilon", t.optimizer.epsilon);
        o.finish();
    }
    r.finish();
}

void read_reference(ObjectReader r, ReferenceSpec& ref) {
    if (r.has("kind")) {
        std::string kind;
        r.string("kind", kind);
        if (kind == "generated") {
            ref.kind = ReferenceSpec::Kind::generated;
        } else if (kind == "file") {
            ref.kind = ReferenceSpec::Kind::file;
        } else {
            throw ConfigError(r.field("kind") + "expected 'generated' or 'file'");
        }
    }
    r.integer("switch_index", ref.switch_index);
    r.string("path", ref.path);
    if (ref.kind == ReferenceSpec::Kind::file && ref.path.empty()) {
        throw ConfigError(r.field("path") + "required when kind is 'file'");
    }
    r.finish();
}

void read_integrator(ObjectReader r, IntegratorConfig& c) {
    r.number("rel_tol", c.rel_tol);
    r.number("abs_tol", c.abs_tol);
    r.number("initial_step_hours", c.initial_step_hours);
    r.number("max_step_hours", c.max_step_hours);
    r.integer("max_steps_per_segment", c.max_steps_per_segment);
    r.finish();
}

}  // namespace

ScenarioConfig ScenarioConfig::defaults(ModelKind kind) {
    ScenarioConfig c;
    c.model = kind;
    c.uncertainty = UncertaintySpec::defaults(kind, 0.0);
    c.train.optimizer.kind = OptimizerConfig::Kind::sgd;
    if (kind == ModelKind::fatty_acid) {
        c.horizon_h = 25.0;
        c.n_intervals = 25;
        c.u_lb = 0.0;
        c.u_ub = 1000.0;
        c.return_kind = ReturnKind::terminal_titer;
        c.train.epochs_max = 350;
        c.train.learning_rate = 0.0075;
        c.baseline_input = 40.0;
    } else {
        c.horizon_h = 9.5;
        c.n_intervals = 11;
        c.u_lb = 0.0;
        c.u_ub = 873.0;
        c.return_kind = ReturnKind::tracking;
        c.train.epochs_max = 500;
        c.train.learning_rate = 0.001;
        c.reference = ReferenceSpec{};
        c.baseline_input = 873.0;
    }
    return c;
}

void ScenarioConfig::validate() const {
    if (!(horizon_h > 0.0)) throw ConfigError("field 'horizon_h': must be > 0");
    if (n_intervals < 1) throw ConfigError("field 'n_intervals': must be >= 1");
    if (!(u_lb < u_ub)) throw ConfigError("field 'input_bounds': lower bound must be below upper bound");
    if (baseline_input < u_lb || baseline_input > u_ub) {
        throw ConfigError("field 'baseline_input': outside input_bounds");
    }
    if (return_kind == ReturnKind::tracking) {
        if (model != ModelKind::lactate) throw ConfigError("field 'return_kind': tracking requires the lactate model");
        if (!reference) throw ConfigError("field 'reference': required for tracking");
        if (reference->kind == ReferenceSpec::Kind::generated &&
            reference->switch_index > static_cast<std::size_t>(n_intervals)) {
            throw ConfigError("field 'reference.switch_index': must be <= n_intervals");
        }
    }
    rethrow_as_config("train", [&] { train.validate(); });
    rethrow_as_config("integrator", [&] { integrator.validate(); });
    const BioModel nominal(model);
    rethrow_as_config("uncertainty", [&] { uncertainty.validate(nominal); });
    for (const auto& [name, value] : params) {
        if (!nominal.has_param(name)) throw ConfigError("field 'params." + name + "': unknown parameter");
    }
    for (const auto& [name, value] : initial_state) {
        rethrow_as_config("initial_state." + name, [&] { return nominal.layout()->index_of(name); });
        if (value < 0.0) throw ConfigError("field 'initial_state." + name + "': must be >= 0");
    }
}

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) { return scenario_to_json(a) == scenario_to_json(b); }

ScenarioConfig parse_scenario(const json& doc) {
    ObjectReader r(doc, "");
    if (!r.has("model")) throw ConfigError("field 'model': required");
    std::string model;
    r.string("model", model);
    const ModelKind kind = rethrow_as_config("model", [&] { return parse_model_kind(model); });
    ScenarioConfig c = ScenarioConfig::defaults(kind);

    r.number("horizon_h", c.horizon_h);
    r.integer("n_intervals", c.n_intervals);
    if (r.has("input_bounds")) {
        const auto& b = r.raw("input_bounds");
        if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number()) {
            throw ConfigError(r.field("input_bounds") + "expected [u_lb, u_ub]");
        }
        c.u_lb = b[0].get<double>();
        c.u_ub = b[1].get<double>();
    }
    if (r.has("return_kind")) {
        std::string rk;
        r.string("return_kind", rk);
        c.return_kind = rethrow_as_config("return_kind", [&] { return parse_return_kind(rk); });
    }
    if (r.has("uncertainty")) read_uncertainty(r.object("uncertainty"), c.uncertainty);
    if (r.has("train")) read_train(r.object("train"), c.train);
    if (r.has("reference")) {
        if (r.raw("reference").is_null()) {
            c.reference.reset();
        } else {
            ReferenceSpec ref = c.reference.value_or(ReferenceSpec{});
            read_reference(r.object("reference"), ref);
            c.reference = ref;
        }
    }
    if (c.return_kind != ReturnKind::tracking) c.reference.reset();
    if (r.has("integrator")) read_integrator(r.object("integrator"), c.integrator);
    r.number("baseline_input", c.baseline_input);
    r.number_map("params", c.params);
    r.number_map("initial_state", c.initial_state);
    r.finish();
    c.validate();
    return c;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifact("config file not found: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    try {
        return parse_scenario(doc);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

json scenario_to_json(const ScenarioConfig& c) {
    json doc;
    doc["model"] = to_string(c.model);
    doc["horizon_h"] = c.horizon_h;
    doc["n_intervals"] = c.n_intervals;
    doc["input_bounds"] = {c.u_lb, c.u_ub};
    doc["return_kind"] = to_string(c.return_kind);
    doc["uncertainty"] = {{"level", c.uncertainty.level},
                          {"ic_targets", c.uncertainty.ic_targets},
                          {"param_targets", c.uncertainty.param_targets},
                          {"distribution", "gaussian"},
                          {"resample_attempts", c.uncertainty.resample_attempts}};
    doc["train"] = {{"epochs_max", c.train.epochs_max},
                    {"episodes_per_epoch", c.train.episodes_per_epoch},
                    {"learning_rate", c.train.learning_rate},
                    {"patience", c.train.patience},
                    {"eps_mach", c.train.eps_mach},
                    {"seed", c.train.seed},
                    {"workers", c.train.workers},
                    {"optimizer",
                     {{"kind", to_string(c.train.optimizer.kind)},
                      {"beta1", c.train.optimizer.beta1},
                      {"beta2", c.train.optimizer.beta2},
                      {"epsilon", c.train.optimizer.epsilon}}}};
    if (c.reference) {
        json ref{{"kind", c.reference->kind == ReferenceSpec::Kind::generated ? "generated" : "file"},
                 {"switch_index", c.reference->switch_index}};
        if (!c.reference->path.empty()) ref["path"] = c.reference->path;
        doc["reference"] = ref;
    }
    doc["integrator"] = {{"rel_tol", c.integrator.rel_tol},
                         {"abs_tol", c.integrator.abs_tol},
                         {"initial_step_hours", c.integrator.initial_step_hours},
                         {"max_step_hours", c.integrator.max_step_hours},
                         {"max_steps_per_segment", c.integrator.max_steps_per_segment}};
    doc["baseline_input"] = c.baseline_input;
    doc["params"] = json::object();
    for (const auto& [k, v] : c.params) doc["params"][k] = v;
    doc["initial_state"] = json::object();
    for (const auto& [k, v] : c.initial_state) doc["initial_state"][k] = v;
    return doc;
}

std::vector<double> scenario_breakpoints(const ScenarioConfig& cfg) {
    std::vector<double> t(static_cast<std::size_t>(cfg.n_intervals) + 1);
    for (int i = 0; i <= cfg.n_intervals; ++i) t[i] = cfg.horizon_h * i / cfg.n_intervals;
    t.back() = cfg.horizon_h;
    return t;
}

Environment to_environment(const ScenarioConfig& cfg, const std::string& base_dir) {
    cfg.validate();
    BioModel model(cfg.model);
    for (const auto& [name, value] : cfg.params) model.set_param(name, value);
    StateVector x0 = model.nominal_initial_state();
    for (const auto& [name, value] : cfg.initial_state) x0.values[x0.layout->index_of(name)] = value;

    Environment env{std::move(model),
                    std::move(x0),
                    cfg.horizon_h,
                    scenario_breakpoints(cfg),
                    cfg.u_lb,
                    cfg.u_ub,
                    cfg.return_kind,
                    cfg.uncertainty,
                    std::nullopt,
                    cfg.integrator,
                    FeatureScales::defaults(cfg.model, cfg.u_lb, cfg.u_ub)};
    if (cfg.return_kind == ReturnKind::tracking) {
        const auto& ref = *cfg.reference;
        if (ref.kind == ReferenceSpec::Kind::generated) {
            const auto& params = std::get<LactateParams>(env.model.params());
            env.reference = generate_reference(params, env.breakpoints, ref.switch_index, cfg.u_ub, cfg.integrator);
        } else {
            std::filesystem::path p(ref.path);
            if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
            env.reference = read_reference_csv(p.string());
        }
    }
    env.validate();
    return env;
}

}  // namespace dmc
