#include "dmc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "dmc/error.hpp"
#include "dmc/parallel.hpp"

namespace dmc {

std::string to_string(OptimizerConfig::Kind kind) { return kind == OptimizerConfig::Kind::sgd ? "sgd" : "adam"; }

OptimizerConfig::Kind parse_optimizer_kind(const std::string& s) {
    if (s == "sgd") return OptimizerConfig::Kind::sgd;
    if (s == "adam") return OptimizerConfig::Kind::adam;
    throw ConfigError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

std::string to_string(Termination t) { return t == Termination::max_epochs ? "max_epochs" : "early_stop"; }

void TrainConfig::validate() const {
    if (epochs_max < 1) throw ConfigError("train.epochs_max must be >= 1");
    if (episodes_per_epoch < 2) throw ConfigError("train.episodes_per_epoch must be >= 2");
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
    if (patience < 1) throw ConfigError("train.patience must be >= 1");
    if (!(eps_mach > 0.0)) throw ConfigError("train.eps_mach must be > 0");
    if (workers < 1) throw ConfigError("train.workers must be >= 1");
}

// ------------------------------------------------------------------ episodes

EpisodeRecord run_episode(const Environment& env, const PolicyParams& theta, const StreamId& id) {
    Rng rng = make_stream(id);
    try {
        EpisodeRecord rec{{}, randomize(env.initial_state, env.model, env.uncertainty, rng, id), {}, 0.0};
        EpisodeSim sim(env, rec.context);
        rec.u_raw.reserve(env.intervals());
        while (!sim.done()) {
            const auto features = sim.features();
            const auto out = forward(theta, features);
            auto draw = sample(out, theta.bounds, rng);
            sim.step(draw.applied[0]);
            rec.u_raw.push_back(std::move(draw.raw));
        }
        rec.ret = sim.episode_return();
        rec.trajectory = sim.trajectory();
        return rec;
    } catch (const SimulationError& e) {
        throw SimulationError(e.kind(), "epoch " + std::to_string(id.epoch) + " episode " + std::to_string(id.episode) +
                                            ": " + e.what());
    }
}

std::vector<double> episode_score(const PolicyParams& theta, const EpisodeRecord& record) {
    std::vector<double> score(theta.values.size(), 0.0);
    PolicyWorkspace ws;
    for (std::size_t t = 0; t < record.u_raw.size(); ++t) {
        accumulate_grad_log_prob(theta, record.trajectory.features[t], record.u_raw[t], score, ws);
    }
    return score;
}

EpisodeFn make_episode_fn(const Environment& env) {
    return [&env](const PolicyParams& theta, const StreamId& id) {
        const auto rec = run_episode(env, theta, id);
        return EpisodeOutcome{rec.ret, episode_score(theta, rec)};
    };
}

// ------------------------------------------------------------------ estimator

std::vector<double> normalized_returns(std::span<const double> returns, double eps_mach) {
    // Equal returns carry no signal; the rounded mean would otherwise leave tiny nonzero weights.
    const auto [lo, hi] = std::minmax_element(returns.begin(), returns.end());
    if (lo != returns.end() && *lo == *hi) return std::vector<double>(returns.size(), 0.0);
    const double n = static_cast<double>(returns.size());
    double mean = 0.0;
    for (double j : returns) mean += j;
    mean /= n;
    double var = 0.0;
    for (double j : returns) var += (j - mean) * (j - mean);
    const double sd = std::sqrt(var / n);
    std::vector<double> w;
    w.reserve(returns.size());
    for (double j : returns) w.push_back((j - mean) / (sd + eps_mach));
    return w;
}

std::vector<double> estimate_gradient(std::span<const std::vector<double>> scores, std::span<const double> returns,
                                      double eps_mach) {
    if (scores.size() != returns.size()) throw DimensionMismatch("one score per return required");
    if (scores.size() < 2) throw ConfigError("gradient estimate needs at least two episodes");
    const auto w = normalized_returns(returns, eps_mach);
    std::vector<double> g(scores.front().size(), 0.0);
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (scores[k].size() != g.size()) throw DimensionMismatch("episode scores differ in size");
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += w[k] * scores[k][i];
    }
    const double inv_n = 1.0 / static_cast<double>(scores.size());
    for (double& gi : g) gi *= inv_n;
    return g;
}

// ------------------------------------------------------------------ optimizer

GradientAscent::GradientAscent(const OptimizerConfig& cfg, double learning_rate, std::size_t n_params)
    : cfg_(cfg), lr_(learning_rate) {
    if (cfg_.kind == OptimizerConfig::Kind::adam) {
        m_.assign(n_params, 0.0);
        v_.assign(n_params, 0.0);
    }
}

void GradientAscent::apply(std::vector<double>& theta, std::span<const double> grad) {
    if (grad.size() != theta.size()) throw DimensionMismatch("gradient does not match parameter count");
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!std::isfinite(grad[i])) throw NonFiniteGradient("gradient component " + std::to_string(i) + " is not finite");
    }
    if (cfg_.kind == OptimizerConfig::Kind::sgd) {
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += lr_ * grad[i];
        return;
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
        const double m_hat = m_[i] / bc1;
        const double v_hat = v_[i] / bc2;
        theta[i] += lr_ * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
    }
}

// ------------------------------------------------------------------ training

namespace {

StreamId training_stream(std::uint64_t seed, int epoch, std::size_t episode) {
    return {seed, StreamFamily::training, static_cast<std::uint64_t>(epoch), episode};
}

}  // namespace

std::vector<EpisodeOutcome> collect_epoch(const EpisodeFn& fn, const PolicyParams& theta, std::uint64_t seed,
                                          int epoch, int episodes, int workers) {
    return map_episodes(static_cast<std::size_t>(episodes), workers,
                        [&](std::size_t k) { return fn(theta, training_stream(seed, epoch, k)); });
}

std::vector<EpisodeOutcome> collect_epoch_serial(const EpisodeFn& fn, const PolicyParams& theta, std::uint64_t seed,
                                                 int epoch, int episodes) {
    return map_episodes_serial(static_cast<std::size_t>(episodes),
                               [&](std::size_t k) { return fn(theta, training_stream(seed, epoch, k)); });
}

TrainResult train(const EpisodeFn& fn, PolicyParams initial, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    initial.validate();
    PolicyParams theta = std::move(initial);
    GradientAscent optimizer(cfg.optimizer, cfg.learning_rate, theta.values.size());

    TrainResult result;
    result.best_policy = theta;
    double best = -std::numeric_limits<double>::infinity();
    int stale = 0;

    for (int epoch = 0; epoch < cfg.epochs_max; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        auto outcomes = collect_epoch(fn, theta, cfg.seed, epoch, cfg.episodes_per_epoch, cfg.workers);

        EpochStats stats;
        stats.epoch = epoch;
        stats.returns.reserve(outcomes.size());
        for (const auto& o : outcomes) stats.returns.push_back(o.ret);
        double mean = 0.0;
        for (double j : stats.returns) mean += j;
        mean /= static_cast<double>(stats.returns.size());
        double var = 0.0;
        for (double j : stats.returns) var += (j - mean) * (j - mean);
        stats.mean_return = mean;
        stats.sd_return = std::sqrt(var / static_cast<double>(stats.returns.size()));

        if (mean > best) {
            best = mean;
            result.best_policy = theta;
            result.best_epoch = epoch;
            stale = 0;
        } else {
            ++stale;
        }
        stats.best_so_far = best;

        const bool stop = stale >= cfg.patience;
        if (!stop) {
            std::vector<std::vector<double>> scores;
            scores.reserve(outcomes.size());
            for (auto& o : outcomes) scores.push_back(std::move(o.score));
            const auto grad = estimate_gradient(scores, stats.returns, cfg.eps_mach);
            try {
                optimizer.apply(theta.values, grad);
            } catch (const NonFiniteGradient& e) {
                throw NonFiniteGradient("epoch " + std::to_string(epoch) + ": " + e.what());
            }
        }
        stats.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        if (on_epoch) on_epoch(stats);
        result.history.push_back(std::move(stats));
        if (stop) {
            result.termination = Termination::early_stop;
            return result;
        }
    }
    result.termination = Termination::max_epochs;
    return result;
}

TrainResult train(const Environment& env, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    env.validate();
    Rng rng = make_stream({cfg.seed, StreamFamily::initialization, 0, 0});
    auto theta = init_policy(default_layer_sizes(env.feature_dim()), PolicyBounds::for_range(env.u_lb, env.u_ub), rng);
    return train(make_episode_fn(env), std::move(theta), cfg, on_epoch);
}

}  // namespace dmc
