// dmc: simulate, train, benchmark and reference verbs over a scenario config.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dmc/commands.hpp"
#include "dmc/error.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kNumerical = 3, kMissing = 4 };

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::optional<int> workers;
    std::optional<int> epochs;
    std::optional<int> episodes;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "scenario JSON file")->required();
    app->add_option("--seed", c.seed, "overrides train.seed");
    app->add_option("--out", c.out, "output directory")->capture_default_str();
}

void add_training(CLI::App* app, Common& c) {
    app->add_option("--workers", c.workers, "episode worker threads")->check(CLI::PositiveNumber);
    app->add_option("--epochs", c.epochs, "overrides train.epochs_max")->check(CLI::PositiveNumber);
    app->add_option("--episodes", c.episodes, "overrides train.episodes_per_epoch")->check(CLI::PositiveNumber);
}

struct Loaded {
    dmc::ScenarioConfig cfg;
    std::string base_dir;
};

Loaded load(const Common& c) {
    Loaded l{dmc::load_scenario(c.config), std::filesystem::path(c.config).parent_path().string()};
    if (l.base_dir.empty()) l.base_dir = ".";
    if (c.seed) l.cfg.train.seed = *c.seed;
    if (c.workers) l.cfg.train.workers = *c.workers;
    if (c.epochs) l.cfg.train.epochs_max = *c.epochs;
    if (c.episodes) l.cfg.train.episodes_per_epoch = *c.episodes;
    l.cfg.validate();
    return l;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic metabolic control by policy-gradient reinforcement learning"};
    app.require_subcommand(1);

    Common sim_opts;
    std::optional<double> sim_u;
    std::string sim_schedule;
    std::optional<double> sim_level;
    auto* simulate = app.add_subcommand("simulate", "open-loop rollout of a constant input or a schedule");
    add_common(simulate, sim_opts);
    auto* u_opt = simulate->add_option("--u", sim_u, "constant input (defaults to baseline_input)");
    simulate->add_option("--schedule", sim_schedule, "CSV with time_h,u per control interval")->excludes(u_opt);
    simulate->add_option("--level", sim_level, "randomize one episode at this uncertainty level")
        ->check(CLI::NonNegativeNumber);

    Common train_opts;
    std::optional<double> train_level;
    auto* train = app.add_subcommand("train", "train a policy and evaluate it over 500 episodes");
    add_common(train, train_opts);
    add_training(train, train_opts);
    train->add_option("--level", train_level, "overrides uncertainty.level")->check(CLI::NonNegativeNumber);

    Common bench_opts;
    dmc::BenchmarkRequest bench_req;
    auto* bench = app.add_subcommand("benchmark", "static vs. dynamic control across uncertainty levels");
    add_common(bench, bench_opts);
    add_training(bench, bench_opts);
    bench->add_option("--level", bench_req.levels, "uncertainty level (repeatable)")
        ->required()
        ->check(CLI::NonNegativeNumber);
    bench->add_option("--checkpoints", bench_req.checkpoint_dir, "directory of policy_level_<level>.ckpt files");
    bench->add_flag("--train", bench_req.train_missing, "train levels without a checkpoint");

    Common ref_opts;
    std::optional<std::size_t> switch_index;
    auto* reference = app.add_subcommand("reference", "golden-batch enzyme reference for the lactate model");
    add_common(reference, ref_opts);
    reference->add_option("--switch-index", switch_index, "first interval at full input");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*simulate) {
            auto l = load(sim_opts);
            dmc::SimulateRequest req{sim_u, sim_schedule, sim_level, l.cfg.train.seed};
            const auto r = dmc::cmd_simulate(l.cfg, req, sim_opts.out, l.base_dir);
            std::cout << "final product " << r.final_product << " g/L, return " << r.episode_return << '\n';
        } else if (*train) {
            auto l = load(train_opts);
            if (train_level) l.cfg.uncertainty.level = *train_level;
            const auto r = dmc::cmd_train(l.cfg, train_opts.out, &std::cerr, l.base_dir);
            std::cout << "best epoch " << r.result.best_epoch << ", mean product " << r.evaluation.mean_product
                      << " g/L (sd " << r.evaluation.sd_product << ")\n";
        } else if (*bench) {
            auto l = load(bench_opts);
            const auto rows = dmc::cmd_benchmark(l.cfg, bench_req, bench_opts.out, &std::cerr, l.base_dir);
            for (const auto& row : rows) {
                std::cout << row.level << ' ' << row.scenario << ' ' << row.mean << " +- " << row.sd;
                if (row.improvement_pct) std::cout << " (" << *row.improvement_pct << "%)";
                std::cout << '\n';
            }
        } else if (*reference) {
            auto l = load(ref_opts);
            const auto ref = dmc::cmd_reference(l.cfg, switch_index, ref_opts.out);
            std::cout << "final e_ref " << ref.e_ref.back() << " VU/g\n";
        }
    } catch (const dmc::MissingArtifact& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kMissing;
    } catch (const dmc::SimulationError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const dmc::NonFiniteGradient& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const dmc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kOk;
}
