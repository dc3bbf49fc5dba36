#pragma once

// The four CLI verbs as library calls. Each writes its artifacts into an
// output directory and returns a small summary for callers and tests.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dmc/scenario.hpp"

namespace dmc {

inline constexpr int kEvaluationEpisodes = 500;

/// Stream tag distinguishing uncertainty levels (level in micro-units).
std::uint64_t level_tag(double level);

struct EvaluationSummary {
    int episodes = 0;
    double mean_return = 0.0;
    double sd_return = 0.0;
    double mean_product = 0.0;
    double sd_product = 0.0;
    double tracking_rmse = 0.0;  // NaN for terminal-titer scenarios
};

/// Rolls `episodes` stochastic-policy episodes on the evaluation streams.
std::vector<EpisodeRecord> evaluate_policy(const Environment& env, const PolicyParams& theta, std::uint64_t seed,
                                           int episodes, int workers);
EvaluationSummary summarize(const Environment& env, const std::vector<EpisodeRecord>& records);

/// Final product titers of a constant input over randomized episodes (static-baseline streams).
std::vector<double> evaluate_constant_input(const Environment& env, double u, std::uint64_t seed, int episodes,
                                            int workers);

/// Reads `time_h,u` rows (one per control interval) and checks them against the breakpoints.
std::vector<double> read_schedule_csv(const std::string& path, const std::vector<double>& breakpoints);

/// Column-wise per-breakpoint mean and sd for every state, the input and the product.
void write_evaluation_csv(const Environment& env, const std::vector<EpisodeRecord>& records, const std::string& path);
void write_trajectory_csv(const Environment& env, const EpisodeContext& ctx, const Trajectory& traj,
                          const std::string& path);

struct SimulateRequest {
    std::optional<double> constant_u;
    std::string schedule_path;
    std::optional<double> level;  // randomize a single episode at this level
    std::uint64_t seed = 0;
};

struct SimulateResult {
    double final_product = 0.0;
    double episode_return = 0.0;
};

SimulateResult cmd_simulate(const ScenarioConfig& cfg, const SimulateRequest& req, const std::string& out_dir,
                            const std::string& base_dir = ".");

struct TrainOutcome {
    TrainResult result;
    EvaluationSummary evaluation;
};

/// Writes policy.ckpt, training_log.csv, evaluation.csv and evaluation_summary.csv.
TrainOutcome cmd_train(const ScenarioConfig& cfg, const std::string& out_dir, std::ostream* log = nullptr,
                       const std::string& base_dir = ".");

struct BenchmarkRow {
    double level = 0.0;
    std::string scenario;  // SC or DC
    double mean = 0.0;
    double sd = 0.0;
    std::optional<double> improvement_pct;
    int episodes = 0;
};

struct BenchmarkRequest {
    std::vector<double> levels;
    std::string checkpoint_dir;
    bool train_missing = false;
};

std::string checkpoint_filename(double level);

/// Writes benchmark.csv. A level without a checkpoint is a MissingArtifact
/// unless train_missing is set, in which case it is trained and saved first.
std::vector<BenchmarkRow> cmd_benchmark(const ScenarioConfig& cfg, const BenchmarkRequest& req,
                                        const std::string& out_dir, std::ostream* log = nullptr,
                                        const std::string& base_dir = ".");

/// Writes reference.csv for the lactate model.
ReferenceTrajectory cmd_reference(const ScenarioConfig& cfg, std::optional<std::size_t> switch_index,
                                  const std::string& out_dir);

}  // namespace dmc
