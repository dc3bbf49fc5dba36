#include "dmc/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>

#include "dmc/csv.hpp"
#include "dmc/error.hpp"
#include "dmc/parallel.hpp"

namespace dmc {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const std::string& dir, const std::string& name) {
    fs::create_directories(dir);
    const auto path = (fs::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingArtifact("cannot write " + path);
    return out;
}

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};

MeanSd mean_sd(const std::vector<double>& v) {
    MeanSd r;
    if (v.empty()) return r;
    for (double x : v) r.mean += x;
    r.mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - r.mean) * (x - r.mean);
    r.sd = std::sqrt(var / static_cast<double>(v.size()));
    return r;
}

double final_product(const EpisodeContext& ctx, const Trajectory& traj) {
    return ctx.model.product_titer(traj.states.back());
}

/// Input held on [t_k, t_{k+1}); the last breakpoint repeats the final input.
double input_at(const Trajectory& traj, std::size_t k) {
    if (traj.inputs.empty()) return 0.0;
    return traj.inputs[std::min(k, traj.inputs.size() - 1)];
}

}  // namespace

std::uint64_t level_tag(double level) { return static_cast<std::uint64_t>(std::llround(level * 1e6)); }

std::vector<EpisodeRecord> evaluate_policy(const Environment& env, const PolicyParams& theta, std::uint64_t seed,
                                           int episodes, int workers) {
    const std::uint64_t tag = level_tag(env.uncertainty.level);
    return map_episodes(static_cast<std::size_t>(episodes), workers, [&](std::size_t k) {
        return run_episode(env, theta, {seed, StreamFamily::evaluation, tag, k});
    });
}

EvaluationSummary summarize(const Environment& env, const std::vector<EpisodeRecord>& records) {
    EvaluationSummary s;
    s.episodes = static_cast<int>(records.size());
    std::vector<double> returns, products;
    double sq = 0.0;
    std::size_t count = 0;
    for (const auto& r : records) {
        returns.push_back(r.ret);
        products.push_back(final_product(r.context, r.trajectory));
        if (env.reference) {
            const std::size_t e = env.model.enzyme_index();
            for (std::size_t k = 1; k < r.trajectory.states.size(); ++k) {
                const double d = r.trajectory.states[k][e] - env.reference->e_ref[k];
                sq += d * d;
                ++count;
            }
        }
    }
    const auto ret = mean_sd(returns);
    const auto prod = mean_sd(products);
    s.mean_return = ret.mean;
    s.sd_return = ret.sd;
    s.mean_product = prod.mean;
    s.sd_product = prod.sd;
    s.tracking_rmse = count ? std::sqrt(sq / static_cast<double>(count)) : std::numeric_limits<double>::quiet_NaN();
    return s;
}

std::vector<double> evaluate_constant_input(const Environment& env, double u, std::uint64_t seed, int episodes,
                                            int workers) {
    const std::uint64_t tag = level_tag(env.uncertainty.level);
    const std::vector<double> inputs(env.intervals(), u);
    return map_episodes(static_cast<std::size_t>(episodes), workers, [&](std::size_t k) {
        const StreamId id{seed, StreamFamily::static_baseline, tag, k};
        Rng rng = make_stream(id);
        const auto ctx = randomize(env.initial_state, env.model, env.uncertainty, rng, id);
        try {
            return final_product(ctx, simulate_inputs(env, ctx, inputs));
        } catch (const SimulationError& e) {
            throw SimulationError(e.kind(), "static baseline episode " + std::to_string(k) + ": " + e.what());
        }
    });
}

std::vector<double> read_schedule_csv(const std::string& path, const std::vector<double>& breakpoints) {
    const auto table = read_csv(path);
    const std::size_t ct = table.column("time_h");
    const std::size_t cu = table.column("u");
    const std::size_t n = breakpoints.size() - 1;
    if (table.rows.size() != n) {
        throw BreakpointMismatch(path + ": expected " + std::to_string(n) + " schedule rows, got " +
                                 std::to_string(table.rows.size()));
    }
    std::vector<double> u;
    for (std::size_t k = 0; k < n; ++k) {
        if (std::abs(table.rows[k][ct] - breakpoints[k]) > 1e-9) {
            throw BreakpointMismatch(path + ": row " + std::to_string(k + 1) + " time " +
                                     format_number(table.rows[k][ct]) + " does not match breakpoint " +
                                     format_number(breakpoints[k]));
        }
        u.push_back(table.rows[k][cu]);
    }
    return u;
}

void write_trajectory_csv(const Environment& env, const EpisodeContext& ctx, const Trajectory& traj,
                          const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingArtifact("cannot write " + path);
    const bool fatty = env.model.kind() == ModelKind::fatty_acid;
    std::vector<std::string> header{"time_h"};
    for (const auto& label : env.model.layout()->labels) header.push_back(label);
    header.insert(header.end(), {"u", "reward"});
    if (fatty) header.insert(header.end(), {"X", "P"});
    write_csv_row(out, header);
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        std::vector<double> row{traj.times[k]};
        row.insert(row.end(), traj.states[k].begin(), traj.states[k].end());
        row.push_back(input_at(traj, k));
        row.push_back(k == 0 ? 0.0 : traj.rewards[k - 1]);
        if (fatty) {
            const auto& p = std::get<FattyAcidParams>(ctx.model.params());
            const auto m = fatty_acid_measure(FattyAcidState::from(traj.states[k]), p);
            row.push_back(m.X);
            row.push_back(m.P);
        }
        write_csv_row(out, row);
    }
}

void write_evaluation_csv(const Environment& env, const std::vector<EpisodeRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingArtifact("cannot write " + path);
    std::vector<std::string> series(env.model.layout()->labels);
    series.push_back("u");
    series.push_back("product");
    std::vector<std::string> header{"time_h"};
    for (const auto& s : series) {
        header.push_back(s + "_mean");
        header.push_back(s + "_sd");
    }
    if (env.reference) header.push_back("e_ref");
    write_csv_row(out, header);

    const std::size_t n_states = env.model.state_size();
    for (std::size_t k = 0; k < env.breakpoints.size(); ++k) {
        std::vector<double> row{env.breakpoints[k]};
        std::vector<double> column(records.size());
        auto emit = [&] {
            const auto ms = mean_sd(column);
            row.push_back(ms.mean);
            row.push_back(ms.sd);
        };
        for (std::size_t i = 0; i < n_states; ++i) {
            for (std::size_t r = 0; r < records.size(); ++r) column[r] = records[r].trajectory.states[k][i];
            emit();
        }
        for (std::size_t r = 0; r < records.size(); ++r) column[r] = input_at(records[r].trajectory, k);
        emit();
        for (std::size_t r = 0; r < records.size(); ++r) {
            column[r] = records[r].context.model.product_titer(records[r].trajectory.states[k]);
        }
        emit();
        if (env.reference) row.push_back(env.reference->e_ref[k]);
        write_csv_row(out, row);
    }
}

// ------------------------------------------------------------------ verbs

SimulateResult cmd_simulate(const ScenarioConfig& cfg, const SimulateRequest& req, const std::string& out_dir,
                            const std::string& base_dir) {
    ScenarioConfig c = cfg;
    c.uncertainty.level = req.level.value_or(0.0);
    const Environment env = to_environment(c, base_dir);

    std::vector<double> inputs;
    if (req.constant_u && !req.schedule_path.empty()) throw ConfigError("give either a constant input or a schedule");
    if (req.constant_u) {
        if (*req.constant_u < env.u_lb || *req.constant_u > env.u_ub) {
            throw ConfigError("input " + format_number(*req.constant_u) + " outside input_bounds");
        }
        inputs.assign(env.intervals(), *req.constant_u);
    } else if (!req.schedule_path.empty()) {
        inputs = read_schedule_csv(req.schedule_path, env.breakpoints);
        ControlSchedule(env.breakpoints, inputs, env.u_lb, env.u_ub);
    } else {
        inputs.assign(env.intervals(), c.baseline_input);
    }

    EpisodeContext ctx = nominal_context(env);
    if (c.uncertainty.level > 0.0) {
        const StreamId id{req.seed, StreamFamily::evaluation, level_tag(c.uncertainty.level), 0};
        Rng rng = make_stream(id);
        ctx = randomize(env.initial_state, env.model, env.uncertainty, rng, id);
    }
    EpisodeSim sim(env, ctx);
    for (double u : inputs) sim.step(u);

    fs::create_directories(out_dir);
    write_trajectory_csv(env, sim.context(), sim.trajectory(), (fs::path(out_dir) / "trajectory.csv").string());
    return {final_product(sim.context(), sim.trajectory()), sim.episode_return()};
}

TrainOutcome cmd_train(const ScenarioConfig& cfg, const std::string& out_dir, std::ostream* log,
                       const std::string& base_dir) {
    const Environment env = to_environment(cfg, base_dir);
    auto log_csv = open_output(out_dir, "training_log.csv");
    write_csv_row(log_csv, std::vector<std::string>{"epoch", "mean_return", "sd_return", "best_so_far", "wall_ms"});

    TrainOutcome outcome;
    outcome.result = train(env, cfg.train, [&](const EpochStats& s) {
        write_csv_row(log_csv, std::vector<double>{static_cast<double>(s.epoch), s.mean_return, s.sd_return,
                                                   s.best_so_far, s.wall_ms});
        if (log && (s.epoch % 10 == 0)) {
            *log << "epoch " << s.epoch << " mean " << s.mean_return << " sd " << s.sd_return << " best "
                 << s.best_so_far << '\n';
        }
    });
    log_csv.close();
    save_checkpoint(outcome.result.best_policy, (fs::path(out_dir) / "policy.ckpt").string());

    const auto records =
        evaluate_policy(env, outcome.result.best_policy, cfg.train.seed, kEvaluationEpisodes, cfg.train.workers);
    write_evaluation_csv(env, records, (fs::path(out_dir) / "evaluation.csv").string());
    outcome.evaluation = summarize(env, records);

    auto summary = open_output(out_dir, "evaluation_summary.csv");
    write_csv_row(summary, std::vector<std::string>{"episodes", "mean_return", "sd_return", "mean_product",
                                                    "sd_product", "tracking_rmse", "best_epoch", "epochs_run",
                                                    "early_stopped"});
    const auto& e = outcome.evaluation;
    write_csv_row(summary, std::vector<double>{
                               static_cast<double>(e.episodes), e.mean_return, e.sd_return, e.mean_product,
                               e.sd_product, e.tracking_rmse, static_cast<double>(outcome.result.best_epoch),
                               static_cast<double>(outcome.result.history.size()),
                               outcome.result.termination == Termination::early_stop ? 1.0 : 0.0});
    if (log) {
        *log << "best epoch " << outcome.result.best_epoch << ", evaluation mean product " << e.mean_product
             << " (sd " << e.sd_product << ")\n";
    }
    return outcome;
}

std::string checkpoint_filename(double level) { return "policy_level_" + format_number(level) + ".ckpt"; }

std::vector<BenchmarkRow> cmd_benchmark(const ScenarioConfig& cfg, const BenchmarkRequest& req,
                                        const std::string& out_dir, std::ostream* log, const std::string& base_dir) {
    if (req.levels.empty()) throw ConfigError("benchmark needs at least one --level");
    const std::string ckpt_dir = req.checkpoint_dir.empty() ? out_dir : req.checkpoint_dir;
    std::vector<BenchmarkRow> rows;
    for (double level : req.levels) {
        if (!(level >= 0.0)) throw ConfigError("level must be >= 0");
        ScenarioConfig c = cfg;
        c.uncertainty.level = level;
        const Environment env = to_environment(c, base_dir);

        const auto ckpt = (fs::path(ckpt_dir) / checkpoint_filename(level)).string();
        PolicyParams theta;
        if (fs::exists(ckpt)) {
            theta = load_checkpoint(ckpt);
        } else if (req.train_missing) {
            if (log) *log << "training level " << level << '\n';
            const auto level_dir = (fs::path(out_dir) / ("train_level_" + format_number(level))).string();
            theta = cmd_train(c, level_dir, log, base_dir).result.best_policy;
            fs::create_directories(ckpt_dir);
            save_checkpoint(theta, ckpt);
        } else {
            throw MissingArtifact("no checkpoint for level " + format_number(level) + ": " + ckpt);
        }
        if (theta.input_dim() != env.feature_dim()) {
            throw DimensionMismatch(ckpt + ": policy expects " + std::to_string(theta.input_dim()) +
                                    " features, scenario provides " + std::to_string(env.feature_dim()));
        }
        if (theta.bounds.u_lb != env.u_lb || theta.bounds.u_ub != env.u_ub) {
            throw ConfigError(ckpt + ": policy input bounds do not match the scenario");
        }

        const auto sc = mean_sd(
            evaluate_constant_input(env, c.baseline_input, c.train.seed, kEvaluationEpisodes, c.train.workers));
        const auto records = evaluate_policy(env, theta, c.train.seed, kEvaluationEpisodes, c.train.workers);
        const auto dc = summarize(env, records);
        rows.push_back({level, "SC", sc.mean, sc.sd, std::nullopt, kEvaluationEpisodes});
        rows.push_back({level, "DC", dc.mean_product, dc.sd_product, 100.0 * (dc.mean_product - sc.mean) / sc.mean,
                        kEvaluationEpisodes});
        if (log) {
            *log << "level " << level << ": SC " << sc.mean << ", DC " << dc.mean_product << " ("
                 << *rows.back().improvement_pct << "%)\n";
        }
    }

    auto out = open_output(out_dir, "benchmark.csv");
    write_csv_row(out, std::vector<std::string>{"level", "scenario", "mean", "sd", "improvement_pct", "episodes"});
    for (const auto& r : rows) {
        write_csv_row(out, std::vector<std::string>{format_number(r.level), r.scenario, format_number(r.mean),
                                                    format_number(r.sd),
                                                    r.improvement_pct ? format_number(*r.improvement_pct) : "",
                                                    std::to_string(r.episodes)});
    }
    return rows;
}

ReferenceTrajectory cmd_reference(const ScenarioConfig& cfg, std::optional<std::size_t> switch_index,
                                  const std::string& out_dir) {
    if (cfg.model != ModelKind::lactate) throw ConfigError("reference requires the lactate model");
    const auto breakpoints = scenario_breakpoints(cfg);
    std::size_t sw = switch_index.value_or(cfg.reference ? cfg.reference->switch_index : ReferenceSpec{}.switch_index);
    if (sw > breakpoints.size() - 1) throw ConfigError("switch_index must be <= n_intervals");
    BioModel model(cfg.model);
    for (const auto& [name, value] : cfg.params) model.set_param(name, value);
    const auto ref =
        generate_reference(std::get<LactateParams>(model.params()), breakpoints, sw, cfg.u_ub, cfg.integrator);
    fs::create_directories(out_dir);
    write_reference_csv(ref, (fs::path(out_dir) / "reference.csv").string());
    return ref;
}

}  // namespace dmc
