#pragma once

// RL environment around a BioModel: per-episode domain randomization,
// feature construction, rewards, and the golden-batch enzyme reference.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmc/models.hpp"
#include "dmc/rng.hpp"
#include "dmc/sim_core.hpp"

namespace dmc {

struct UncertaintySpec {
    double level = 0.0;
    std::vector<std::string> ic_targets;
    std::vector<std::string> param_targets;
    int resample_attempts = 100;

    static constexpr double positivity_floor = 1e-9;

    /// Nonzero initial conditions plus k_E, k_R1 (fatty acid) or q_Emax (lactate).
    static UncertaintySpec defaults(ModelKind kind, double level);
    void validate(const BioModel& model) const;
};

struct EpisodeContext {
    StateVector initial_state;
    BioModel model;
    StreamId stream;
};

/// Perturbs every targeted quantity q by Normal(0, (level |q|)^2). Draw order is
/// ic_targets then param_targets, so the context is a function of the stream alone.
EpisodeContext randomize(const StateVector& nominal_ics, const BioModel& nominal_model, const UncertaintySpec& spec,
                         Rng& rng, const StreamId& id = {});

using FeatureVector = std::vector<double>;

struct FeatureScales {
    std::vector<double> state;
    double u_lb = 0.0;
    double u_ub = 1.0;

    static FeatureScales defaults(ModelKind kind, double u_lb, double u_ub);
};

struct StateInputPair {
    std::span<const double> state;
    double input = 0.0;
};

/// [prev state, prev input, curr state, curr input, time], each mapped to [-1, 1].
/// Without a previous pair the current state with input 0 stands in.
FeatureVector build_features(const std::optional<StateInputPair>& prev, const StateInputPair& curr, double t,
                             double horizon, const FeatureScales& scales);

std::size_t feature_dimension(std::size_t n_states, std::size_t n_inputs = 1);

struct Trajectory {
    std::vector<double> times;                 // N+1 breakpoints
    std::vector<std::vector<double>> states;   // N+1 states
    std::vector<double> inputs;                // N applied inputs
    std::vector<double> rewards;               // N step rewards, rewards[k] is R_{k+1}
    std::vector<FeatureVector> features;       // N feature vectors, one per decision
    std::size_t intervals = 0;                 // planned N

    bool complete() const { return intervals > 0 && states.size() == intervals + 1; }
    double total_reward() const;
};

struct ReferenceTrajectory {
    std::vector<double> times;
    std::vector<double> e_ref;
};

enum class ReturnKind { terminal_titer, tracking };

std::string to_string(ReturnKind kind);
ReturnKind parse_return_kind(const std::string& s);

/// J = P(t_N) in g/L.
double reward_terminal_titer(const Trajectory& traj, const BioModel& model);
/// J = -sum_{t=1..N} (E_t - E_ref,t)^2.
double reward_tracking(const Trajectory& traj, const ReferenceTrajectory& ref, std::size_t enzyme_index);

/// Enzyme profile of the nominal lactate model with u = 0 before `switch_index`
/// and u = u_ub from it on.
ReferenceTrajectory generate_reference(const LactateParams& params, const std::vector<double>& breakpoints,
                                       std::size_t switch_index, double u_ub, const IntegratorConfig& cfg);

void write_reference_csv(const ReferenceTrajectory& ref, const std::string& path);
ReferenceTrajectory read_reference_csv(const std::string& path);

/// Everything an episode needs, resolved from a scenario config.
struct Environment {
    BioModel model;
    StateVector initial_state;
    double horizon = 0.0;
    std::vector<double> breakpoints;
    double u_lb = 0.0;
    double u_ub = 1.0;
    ReturnKind return_kind = ReturnKind::terminal_titer;
    UncertaintySpec uncertainty;
    std::optional<ReferenceTrajectory> reference;
    IntegratorConfig integrator;
    FeatureScales scales;

    std::size_t intervals() const { return breakpoints.size() - 1; }
    std::size_t feature_dim() const { return feature_dimension(model.state_size()); }
    void validate() const;
};

/// Steps one episode through its control intervals.
class EpisodeSim {
public:
    EpisodeSim(const Environment& env, EpisodeContext ctx);

    bool done() const { return step_ == env_->intervals(); }
    std::size_t step_index() const { return step_; }
    /// Feature vector for the next decision.
    FeatureVector features() const;
    /// Applies `u` (clipped to the bounds) over the next interval; returns the step reward.
    double step(double u);

    const Trajectory& trajectory() const { return traj_; }
    const EpisodeContext& context() const { return ctx_; }
    /// Total return of a finished episode.
    double episode_return() const;

private:
    const Environment* env_;
    EpisodeContext ctx_;
    Trajectory traj_;
    std::size_t step_ = 0;
};

/// Runs a full open-loop input sequence (length N) through an episode.
Trajectory simulate_inputs(const Environment& env, const EpisodeContext& ctx, std::span<const double> inputs);

/// Deterministic context: nominal ICs and parameters.
EpisodeContext nominal_context(const Environment& env);

}  // namespace dmc
