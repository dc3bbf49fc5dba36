// Times one epoch of episode rollouts: the serial reference against the
// OpenMP kernel at several worker counts, and checks both give the same returns.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dmc/scenario.hpp"
#include "dmc/trainer.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <class F>
double median_ms(int repeats, F&& f) {
    std::vector<double> ms;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = Clock::now();
        f();
        ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    }
    std::sort(ms.begin(), ms.end());
    return ms[ms.size() / 2];
}

bool same_returns(const std::vector<dmc::EpisodeOutcome>& a, const std::vector<dmc::EpisodeOutcome>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k].ret != b[k].ret || a[k].score != b[k].score) return false;
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Serial vs. OpenMP episode rollouts"};
    std::string model = "fatty_acid";
    int episodes = 500;
    int repeats = 3;
    double level = 0.1;
    std::vector<int> workers{2, 4, 8};
    app.add_option("--model", model, "fatty_acid or lactate")->capture_default_str();
    app.add_option("--episodes", episodes, "episodes per epoch")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--repeats", repeats, "timed repetitions (median reported)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--level", level, "uncertainty level")->check(CLI::NonNegativeNumber)->capture_default_str();
    app.add_option("--workers", workers, "worker counts for the parallel kernel")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = dmc::ScenarioConfig::defaults(dmc::parse_model_kind(model));
        cfg.uncertainty.level = level;
        const auto env = dmc::to_environment(cfg);
        dmc::Rng rng = dmc::make_stream({1, dmc::StreamFamily::initialization, 0, 0});
        const auto theta = dmc::init_policy(dmc::default_layer_sizes(env.feature_dim()),
                                            dmc::PolicyBounds::for_range(env.u_lb, env.u_ub), rng);
        const auto fn = dmc::make_episode_fn(env);

        std::vector<dmc::EpisodeOutcome> reference;
        const double serial =
            median_ms(repeats, [&] { reference = dmc::collect_epoch_serial(fn, theta, 1, 0, episodes); });
        std::printf("%-10s %8s %12s %9s %s\n", "kernel", "workers", "median_ms", "speedup", "identical");
        std::printf("%-10s %8d %12.1f %9.2f %s\n", "serial", 1, serial, 1.0, "yes");
        bool all_same = true;
        for (int w : workers) {
            std::vector<dmc::EpisodeOutcome> out;
            const double t = median_ms(repeats, [&] { out = dmc::collect_epoch(fn, theta, 1, 0, episodes, w); });
            const bool same = same_returns(reference, out);
            all_same = all_same && same;
            std::printf("%-10s %8d %12.1f %9.2f %s\n", "openmp", w, t, serial / t, same ? "yes" : "NO");
        }
        return all_same ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
