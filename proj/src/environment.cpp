#include "dmc/environment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dmc/csv.hpp"

namespace dmc {

// ------------------------------------------------------------ randomization

UncertaintySpec UncertaintySpec::defaults(ModelKind kind, double level) {
    UncertaintySpec spec;
    spec.level = level;
    if (kind == ModelKind::fatty_acid) {
        spec.ic_targets = {"S", "Xstar", "R"};
        spec.param_targets = {"k_E", "k_R1"};
    } else {
        spec.ic_targets = {"S", "X"};
        spec.param_targets = {"q_Emax"};
    }
    return spec;
}

void UncertaintySpec::validate(const BioModel& model) const {
    if (!(level >= 0.0) || !std::isfinite(level)) throw ConfigError("uncertainty.level must be >= 0");
    if (resample_attempts < 0) throw ConfigError("uncertainty.resample_attempts must be >= 0");
    for (const auto& name : ic_targets) model.layout()->index_of(name);
    for (const auto& name : param_targets) {
        if (!model.has_param(name)) throw ConfigError("unknown parameter target '" + name + "'");
    }
}

namespace {

double perturb(double nominal, double level, int attempts, std::normal_distribution<double>& normal, Rng& rng) {
    const double sigma = level * std::abs(nominal);
    if (sigma == 0.0) return nominal;
    double v = nominal + sigma * normal(rng);
    for (int i = 0; i < attempts && !(v > 0.0); ++i) v = nominal + sigma * normal(rng);
    return v > 0.0 ? v : UncertaintySpec::positivity_floor;
}

}  // namespace

EpisodeContext randomize(const StateVector& nominal_ics, const BioModel& nominal_model, const UncertaintySpec& spec,
                         Rng& rng, const StreamId& id) {
    EpisodeContext ctx{nominal_ics, nominal_model, id};
    if (spec.level == 0.0) return ctx;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const auto& name : spec.ic_targets) {
        const std::size_t i = nominal_ics.layout->index_of(name);
        ctx.initial_state.values[i] = perturb(nominal_ics.values[i], spec.level, spec.resample_attempts, normal, rng);
    }
    for (const auto& name : spec.param_targets) {
        ctx.model.set_param(name, perturb(nominal_model.param(name), spec.level, spec.resample_attempts, normal, rng));
    }
    return ctx;
}

// ----------------------------------------------------------------- features

FeatureScales FeatureScales::defaults(ModelKind kind, double u_lb, double u_ub) {
    FeatureScales s;
    s.state = kind == ModelKind::fatty_acid ? std::vector<double>{1.0, 1.0, 3.0, 2.0, 13.0, 5.0}
                                            : std::vector<double>{4.0, 1.0, 5.0, 10.0};
    s.u_lb = u_lb;
    s.u_ub = u_ub;
    return s;
}

std::size_t feature_dimension(std::size_t n_states, std::size_t n_inputs) { return 2 * (n_states + n_inputs) + 1; }

namespace {

double unit_to_signed(double v) { return std::clamp(2.0 * v - 1.0, -1.0, 1.0); }

void append_pair(FeatureVector& out, const StateInputPair& pair, const FeatureScales& scales) {
    for (std::size_t i = 0; i < pair.state.size(); ++i) out.push_back(unit_to_signed(pair.state[i] / scales.state[i]));
    out.push_back(unit_to_signed((pair.input - scales.u_lb) / (scales.u_ub - scales.u_lb)));
}

}  // namespace

FeatureVector build_features(const std::optional<StateInputPair>& prev, const StateInputPair& curr, double t,
                             double horizon, const FeatureScales& scales) {
    if (curr.state.size() != scales.state.size()) throw DimensionMismatch("feature scales do not match state size");
    FeatureVector out;
    out.reserve(feature_dimension(curr.state.size()));
    append_pair(out, prev.value_or(StateInputPair{curr.state, 0.0}), scales);
    append_pair(out, curr, scales);
    out.push_back(std::clamp(2.0 * t / horizon - 1.0, -1.0, 1.0));
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(out[i] >= -1.0 && out[i] <= 1.0)) {
            throw SimulationError(SimulationError::Kind::NonFiniteState,
                                  "feature " + std::to_string(i) + " is not finite");
        }
    }
    return out;
}

// ------------------------------------------------------------------ rewards

double Trajectory::total_reward() const {
    double sum = 0.0;
    for (double r : rewards) sum += r;
    return sum;
}

std::string to_string(ReturnKind kind) { return kind == ReturnKind::terminal_titer ? "terminal_titer" : "tracking"; }

ReturnKind parse_return_kind(const std::string& s) {
    if (s == "terminal_titer") return ReturnKind::terminal_titer;
    if (s == "tracking") return ReturnKind::tracking;
    throw ConfigError("unknown return_kind '" + s + "' (expected terminal_titer or tracking)");
}

double reward_terminal_titer(const Trajectory& traj, const BioModel& model) {
    if (!traj.complete()) throw IncompleteTrajectory("terminal titer needs a complete trajectory");
    return model.product_titer(traj.states.back());
}

double reward_tracking(const Trajectory& traj, const ReferenceTrajectory& ref, std::size_t enzyme_index) {
    if (ref.times.size() != traj.times.size() || ref.e_ref.size() != traj.states.size())
        throw BreakpointMismatch("reference and trajectory have different breakpoint counts");
    for (std::size_t i = 0; i < ref.times.size(); ++i) {
        if (std::abs(ref.times[i] - traj.times[i]) > 1e-9)
            throw BreakpointMismatch("reference breakpoint " + std::to_string(i) + " differs from trajectory");
    }
    double j = 0.0;
    for (std::size_t t = 1; t < traj.states.size(); ++t) {
        const double e = traj.states[t][enzyme_index] - ref.e_ref[t];
        j -= e * e;
    }
    return j;
}

// ---------------------------------------------------------------- reference

ReferenceTrajectory generate_reference(const LactateParams& params, const std::vector<double>& breakpoints,
                                       std::size_t switch_index, double u_ub, const IntegratorConfig& cfg) {
    if (breakpoints.size() < 2) throw ConfigError("reference needs at least one interval");
    const std::size_t n = breakpoints.size() - 1;
    if (switch_index > n) throw ConfigError("switch_index must lie in [0, " + std::to_string(n) + "]");
    std::vector<double> values(n, 0.0);
    std::fill(values.begin() + static_cast<std::ptrdiff_t>(switch_index), values.end(), u_ub);
    const ControlSchedule schedule(breakpoints, values, 0.0, u_ub);

    const BioModel model{BioModel::Params{params}};
    auto rhs = [&model](double, std::span<const double> x, double u, std::span<double> dx) { model.rhs(x, u, dx); };
    const auto states = rollout(rhs, model.nominal_initial_state(), schedule, cfg, Positivity::soft_floor);

    ReferenceTrajectory ref;
    ref.times = breakpoints;
    for (const auto& s : states) ref.e_ref.push_back(s.values[model.enzyme_index()]);
    return ref;
}

void write_reference_csv(const ReferenceTrajectory& ref, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MissingArtifact("cannot write " + path);
    write_csv_row(out, std::vector<std::string>{"time_h", "e_ref"});
    for (std::size_t i = 0; i < ref.times.size(); ++i) write_csv_row(out, std::vector<double>{ref.times[i], ref.e_ref[i]});
}

ReferenceTrajectory read_reference_csv(const std::string& path) {
    const auto table = read_csv(path);
    const std::size_t ct = table.column("time_h");
    const std::size_t ce = table.column("e_ref");
    ReferenceTrajectory ref;
    for (const auto& row : table.rows) {
        ref.times.push_back(row[ct]);
        ref.e_ref.push_back(row[ce]);
    }
    if (ref.times.size() < 2) throw ConfigError(path + ": reference needs at least two rows");
    return ref;
}

// -------------------------------------------------------------- environment

void Environment::validate() const {
    if (breakpoints.size() < 2) throw ConfigError("scenario needs at least one control interval");
    if (!(u_lb < u_ub)) throw ConfigError("input bounds must satisfy u_lb < u_ub");
    integrator.validate();
    uncertainty.validate(model);
    if (scales.state.size() != model.state_size()) throw ConfigError("feature scales do not match the model");
    if (return_kind == ReturnKind::tracking) {
        if (!reference) throw ConfigError("tracking return needs a reference trajectory");
        if (reference->times.size() != breakpoints.size())
            throw BreakpointMismatch("reference has " + std::to_string(reference->times.size()) +
                                     " rows, scenario has " + std::to_string(breakpoints.size()) + " breakpoints");
        for (std::size_t i = 0; i < breakpoints.size(); ++i) {
            if (std::abs(reference->times[i] - breakpoints[i]) > 1e-9)
                throw BreakpointMismatch("reference time " + std::to_string(i) + " does not match the schedule");
        }
    }
}

EpisodeContext nominal_context(const Environment& env) { return {env.initial_state, env.model, {}}; }

EpisodeSim::EpisodeSim(const Environment& env, EpisodeContext ctx) : env_(&env), ctx_(std::move(ctx)) {
    traj_.intervals = env.intervals();
    traj_.times = env.breakpoints;
    traj_.states.reserve(env.intervals() + 1);
    traj_.states.push_back(ctx_.initial_state.values);
}

FeatureVector EpisodeSim::features() const {
    const auto& states = traj_.states;
    const auto& inputs = traj_.inputs;
    std::optional<StateInputPair> prev;
    if (step_ > 0) prev = StateInputPair{states[step_ - 1], step_ > 1 ? inputs[step_ - 2] : 0.0};
    const StateInputPair curr{states[step_], step_ > 0 ? inputs[step_ - 1] : 0.0};
    return build_features(prev, curr, env_->breakpoints[step_], env_->horizon, env_->scales);
}

double EpisodeSim::step(double u) {
    if (done()) throw IncompleteTrajectory("episode already finished");
    u = std::clamp(u, env_->u_lb, env_->u_ub);
    traj_.features.push_back(features());

    std::vector<double> y = traj_.states.back();
    const BioModel& model = ctx_.model;
    auto rhs = [&model](double, std::span<const double> x, double uu, std::span<double> dx) { model.rhs(x, uu, dx); };
    try {
        integrate_in_place(rhs, y, u, env_->breakpoints[step_], env_->breakpoints[step_ + 1], env_->integrator);
        apply_positivity(y, Positivity::soft_floor, env_->integrator);
    } catch (const SimulationError& e) {
        throw SimulationError(e.kind(), "segment " + std::to_string(step_) + ": " + e.what());
    }
    traj_.inputs.push_back(u);
    traj_.states.push_back(std::move(y));
    ++step_;

    double reward = 0.0;
    if (env_->return_kind == ReturnKind::terminal_titer) {
        if (done()) reward = model.product_titer(traj_.states.back());
    } else {
        const double e = traj_.states.back()[model.enzyme_index()] - env_->reference->e_ref[step_];
        reward = -e * e;
    }
    traj_.rewards.push_back(reward);
    return reward;
}

double EpisodeSim::episode_return() const {
    if (!done()) throw IncompleteTrajectory("episode not finished");
    return traj_.total_reward();
}

Trajectory simulate_inputs(const Environment& env, const EpisodeContext& ctx, std::span<const double> inputs) {
    if (inputs.size() != env.intervals())
        throw ConfigError("expected " + std::to_string(env.intervals()) + " inputs, got " + std::to_string(inputs.size()));
    EpisodeSim sim(env, ctx);
    for (double u : inputs) sim.step(u);
    return sim.trajectory();
}

}  // namespace dmc
