#pragma once

// REINFORCE with per-epoch return normalization: roll out a batch of
// randomized episodes, weight each episode's score function by its
// standardized return, ascend.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dmc/environment.hpp"
#include "dmc/policy.hpp"
#include "dmc/rng.hpp"

namespace dmc {

struct OptimizerConfig {
    enum class Kind { sgd, adam };
    Kind kind = Kind::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

std::string to_string(OptimizerConfig::Kind kind);
OptimizerConfig::Kind parse_optimizer_kind(const std::string& s);

struct TrainConfig {
    int epochs_max = 350;
    int episodes_per_epoch = 500;
    double learning_rate = 0.0075;
    int patience = 50;
    double eps_mach = 1e-8;
    std::uint64_t seed = 0;
    OptimizerConfig optimizer;
    int workers = 1;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double mean_return = 0.0;
    double sd_return = 0.0;  // population
    double best_so_far = 0.0;
    double wall_ms = 0.0;
    std::vector<double> returns;
};

enum class Termination { max_epochs, early_stop };
std::string to_string(Termination t);

struct TrainResult {
    PolicyParams best_policy;  // parameters that generated the best epoch's episodes
    int best_epoch = -1;
    std::vector<EpochStats> history;
    Termination termination = Termination::max_epochs;
};

/// What the trainer needs from one episode: its return and sum_t grad log pi.
struct EpisodeOutcome {
    double ret = 0.0;
    std::vector<double> score;
};

/// Must be a pure function of (theta, stream id); it is called concurrently.
using EpisodeFn = std::function<EpisodeOutcome(const PolicyParams&, const StreamId&)>;

/// One policy-driven episode with everything needed for the score function.
struct EpisodeRecord {
    Trajectory trajectory;
    EpisodeContext context;
    std::vector<std::vector<double>> u_raw;  // per decision
    double ret = 0.0;
};

/// Randomizes the episode from `id`, then alternates feature -> policy sample -> segment.
EpisodeRecord run_episode(const Environment& env, const PolicyParams& theta, const StreamId& id);

/// sum_t grad log pi(u_raw_t | s_t) over a recorded episode.
std::vector<double> episode_score(const PolicyParams& theta, const EpisodeRecord& record);

EpisodeFn make_episode_fn(const Environment& env);

/// (J_k - mean) / (sd + eps) with the population standard deviation.
std::vector<double> normalized_returns(std::span<const double> returns, double eps_mach);

/// (1/N) sum_k w_k score_k, reduced in ascending k.
std::vector<double> estimate_gradient(std::span<const std::vector<double>> scores, std::span<const double> returns,
                                      double eps_mach);

/// Gradient ascent on a flat parameter vector; Adam keeps its moments between calls.
class GradientAscent {
public:
    GradientAscent(const OptimizerConfig& cfg, double learning_rate, std::size_t n_params);

    /// Throws NonFiniteGradient before touching theta if the gradient has NaN/Inf.
    void apply(std::vector<double>& theta, std::span<const double> grad);

private:
    OptimizerConfig cfg_;
    double lr_;
    std::vector<double> m_;
    std::vector<double> v_;
    long t_ = 0;
};

/// Episodes of one epoch, on cfg.workers threads (OpenMP) or serially.
std::vector<EpisodeOutcome> collect_epoch(const EpisodeFn& fn, const PolicyParams& theta, std::uint64_t seed,
                                          int epoch, int episodes, int workers);
std::vector<EpisodeOutcome> collect_epoch_serial(const EpisodeFn& fn, const PolicyParams& theta, std::uint64_t seed,
                                                 int epoch, int episodes);

using EpochCallback = std::function<void(const EpochStats&)>;

TrainResult train(const EpisodeFn& fn, PolicyParams initial, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Initializes the default 4x20 policy for the environment from cfg.seed and trains it.
TrainResult train(const Environment& env, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace dmc
