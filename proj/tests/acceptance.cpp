// Acceptance run: one PASS/FAIL line per criterion. Criteria listed with
// --expect-fail still print their outcome but do not fail the exit code.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "dmc/commands.hpp"
#include "dmc/csv.hpp"
#include "oracles.hpp"

using namespace dmc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Options {
    std::string config_dir;
    std::string unit_tests;
    std::string work_dir;
    std::set<int> expect_fail;
    std::set<int> only;
    bool smoke = false;
    int workers = 1;
};

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

fs::path fresh_dir(const Options& o, const std::string& name) {
    const auto dir = fs::path(o.work_dir) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ScenarioConfig shipped(const Options& o, const std::string& name, int workers) {
    auto cfg = load_scenario((fs::path(o.config_dir) / name).string());
    cfg.train.workers = workers;
    return cfg;
}

double deterministic_product(const ScenarioConfig& cfg, double u) {
    const auto env = to_environment(cfg);
    const auto ctx = nominal_context(env);
    return ctx.model.product_titer(simulate_inputs(env, ctx, std::vector<double>(env.intervals(), u)).states.back());
}

Outcome static_baseline(const Options& o, const std::string& config, double target) {
    auto cfg = shipped(o, config, 1);
    cfg.uncertainty.level = 0.0;
    const auto dir = fresh_dir(o, "static_" + to_string(cfg.model));
    const auto t0 = Clock::now();
    const auto r = cmd_simulate(cfg, {cfg.baseline_input, "", std::nullopt, cfg.train.seed}, dir.string());
    const double ms = elapsed_ms(t0);
    const bool ok = std::abs(r.final_product - target) <= 0.02 * target && ms < 1000.0;
    return {ok, "final product " + fmt(r.final_product) + " g/L (target " + fmt(target) + " +-2%), " + fmt(ms, 3) +
                    " ms"};
}

/// Runs `per_seed` for seeds 1..3 until two agree; passes when two seeds pass.
Outcome two_of_three(const std::function<Outcome(std::uint64_t)>& per_seed) {
    int passed = 0, failed = 0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 3 && passed < 2 && failed < 2; ++seed) {
        const auto r = per_seed(seed);
        (r.pass ? passed : failed) += 1;
        detail += "[seed " + std::to_string(seed) + (r.pass ? " ok: " : " miss: ") + r.detail + "] ";
    }
    return {passed >= 2, detail + std::to_string(passed) + " seed(s) passed"};
}

Outcome deterministic_fatty_acid(const Options& o) {
    return two_of_three([&](std::uint64_t seed) {
        auto cfg = shipped(o, "fatty_acid.json", o.workers);
        cfg.uncertainty.level = 0.0;
        cfg.train.seed = seed;
        if (o.smoke) {
            cfg.train.epochs_max = 50;
            cfg.train.episodes_per_epoch = 200;
        }
        const double sc = deterministic_product(cfg, cfg.baseline_input);
        const auto t0 = Clock::now();
        const auto r = cmd_train(cfg, fresh_dir(o, "c3_seed" + std::to_string(seed)).string());
        const double dc = r.evaluation.mean_product;
        const bool ok = o.smoke ? dc >= 1.80 : (dc >= 2.10 && dc >= 1.25 * sc);
        return Outcome{ok, "DC " + fmt(dc) + " g/L, " + fmt(dc / sc, 3) + "x SC, best epoch " +
                               std::to_string(r.result.best_epoch) + ", " + fmt(elapsed_ms(t0) / 1000.0, 3) + " s"};
    });
}

Outcome deterministic_lactate(const Options& o) {
    return two_of_three([&](std::uint64_t seed) {
        auto cfg = shipped(o, "lactate.json", o.workers);
        cfg.uncertainty.level = 0.0;
        cfg.train.seed = seed;
        const auto t0 = Clock::now();
        const auto r = cmd_train(cfg, fresh_dir(o, "c4_seed" + std::to_string(seed)).string());
        const auto& e = r.evaluation;
        const bool ok = e.mean_product >= 3.50 && e.tracking_rmse <= 0.5;
        return Outcome{ok, "L " + fmt(e.mean_product) + " g/L, RMSE " + fmt(e.tracking_rmse, 3) + " VU/g, best epoch " +
                               std::to_string(r.result.best_epoch) + ", " + fmt(elapsed_ms(t0) / 1000.0, 3) + " s"};
    });
}

Outcome sweep(const Options& o, const std::string& config, const std::vector<double>& levels,
              const std::vector<double>& sc_expected, double min_improvement) {
    return two_of_three([&](std::uint64_t seed) {
        auto cfg = shipped(o, config, o.workers);
        cfg.train.seed = seed;
        const auto dir = fresh_dir(o, "sweep_" + to_string(cfg.model) + "_seed" + std::to_string(seed));
        const auto rows = cmd_benchmark(cfg, {levels, "", true}, dir.string());
        bool ok = true;
        std::string detail;
        for (std::size_t i = 0; i < levels.size(); ++i) {
            const auto& sc = rows[2 * i];
            const auto& dc = rows[2 * i + 1];
            const bool sc_ok = std::abs(sc.mean - sc_expected[i]) <= 0.10 * sc_expected[i];
            const bool dc_ok = *dc.improvement_pct >= min_improvement;
            ok = ok && sc_ok && dc_ok;
            detail += fmt(100.0 * levels[i], 3) + "%: SC " + fmt(sc.mean) + (sc_ok ? "" : "(!)") + " DC " +
                      fmt(dc.mean) + " " + fmt(*dc.improvement_pct, 3) + "%" + (dc_ok ? "" : "(!)") + "; ";
        }
        return Outcome{ok, detail};
    });
}

Outcome gradient_oracle() {
    oracle::Gen g(2024);
    const auto bounds = PolicyBounds::for_range(0.0, 1000.0);
    const double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        Rng rng = make_stream({static_cast<std::uint64_t>(trial), StreamFamily::test, 0, 0});
        auto theta = init_policy(default_layer_sizes(15), bounds, rng);
        for (auto& v : theta.values) v += g.normal(0.3);
        std::vector<double> s(15);
        for (auto& v : s) v = g.uniform(-1.0, 1.0);
        const auto out = forward(theta, s);
        const std::vector<double> u{out.mean[0] + out.stddev[0] * g.normal()};
        const auto grad = grad_log_prob(theta, s, u);
        std::vector<__float128> p(theta.values.begin(), theta.values.end());
        for (std::size_t i = 0; i < p.size(); ++i) {
            const __float128 keep = p[i];
            p[i] = keep + h;
            const __float128 up = oracle::log_prob_q(theta, p, s, u);
            p[i] = keep - h;
            const __float128 down = oracle::log_prob_q(theta, p, s, u);
            p[i] = keep;
            const double fd = static_cast<double>((up - down) / (2 * static_cast<__float128>(h)));
            if (fd == 0.0 && grad[i] == 0.0) continue;
            worst = std::max(worst, std::abs(grad[i] - fd) / std::abs(fd));
        }
    }
    return {worst < 1e-4, "worst relative error " + fmt(worst, 3) + " over 10 triples"};
}

Outcome estimator_oracle() {
    const double theta = 0.7, sigma = 0.5;
    const int n = 100000;
    std::vector<std::vector<double>> scores(n);
    std::vector<double> returns(n);
    double sum = 0.0, sum_sq = 0.0;
    for (int k = 0; k < n; ++k) {
        Rng rng = make_stream({11, StreamFamily::test, 0, static_cast<std::uint64_t>(k)});
        const double u = theta + sigma * std::normal_distribution<double>(0.0, 1.0)(rng);
        returns[k] = -u * u;
        scores[k] = {(u - theta) / (sigma * sigma)};
        sum += returns[k];
        sum_sq += returns[k] * returns[k];
    }
    const double sd = std::sqrt(sum_sq / n - (sum / n) * (sum / n));
    const double eps = 1e-8;
    const double g = estimate_gradient(scores, returns, eps)[0] * (sd + eps);
    const double exact = -2.0 * theta;
    return {std::abs(g - exact) <= 0.10 * std::abs(exact), "estimate " + fmt(g) + " vs " + fmt(exact)};
}

Outcome integrator_oracle() {
    struct Case {
        ModelKind kind;
        double horizon;
        int n;
        std::vector<double> inputs;
    };
    std::vector<double> sw(11, 873.0);
    std::fill_n(sw.begin(), 5, 0.0);
    const std::vector<Case> cases{{ModelKind::fatty_acid, 25.0, 25, std::vector<double>(25, 40.0)},
                                  {ModelKind::lactate, 9.5, 11, std::vector<double>(11, 873.0)},
                                  {ModelKind::lactate, 9.5, 11, sw}};
    double worst_rk4 = 0.0, worst_halving = 0.0;
    for (const auto& c : cases) {
        const BioModel m(c.kind);
        auto rhs = [&](double, std::span<const double> x, double u, std::span<double> dx) { m.rhs(x, u, dx); };
        const auto sched = ControlSchedule::uniform(c.horizon, c.n, 0.0, 0.0, 1000.0);
        const ControlSchedule applied(sched.breakpoints(), c.inputs, 0.0, 1000.0);
        IntegratorConfig fine;
        fine.rel_tol /= 2.0;
        fine.abs_tol /= 2.0;
        const auto states = rollout(rhs, m.nominal_initial_state(), applied, IntegratorConfig{});
        const auto halved = rollout(rhs, m.nominal_initial_state(), applied, fine);
        const auto ref = oracle::rk4_rollout(m, m.nominal_initial_state().values, sched.breakpoints(), c.inputs);
        // Errors are scaled by each component's peak along the trajectory: a
        // depleted substrate sits at zero, where RK4 overshoots by O(h).
        for (std::size_t i = 0; i < ref.front().size(); ++i) {
            double peak = 0.0;
            for (const auto& x : ref) peak = std::max(peak, std::abs(x[i]));
            for (std::size_t k = 0; k < ref.size(); ++k) {
                worst_rk4 = std::max(worst_rk4, oracle::rel_err(states[k][i], ref[k][i], peak));
            }
            worst_halving = std::max(worst_halving, oracle::rel_err(states.back()[i], halved.back()[i], peak));
        }
    }
    return {worst_rk4 < 1e-4 && worst_halving < 1e-6,
            "worst RK4 deviation " + fmt(worst_rk4, 3) + ", tolerance halving " + fmt(worst_halving, 3)};
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Text of a CSV with the wall-clock column blanked.
std::string without_wall_clock(const fs::path& path) {
    const auto table = read_csv_text(path.string());
    const std::size_t c = table.column("wall_ms");
    std::string out;
    for (auto row : table.rows) {
        row[c].clear();
        for (const auto& cell : row) out += cell + ",";
        out += "\n";
    }
    return out;
}

Outcome determinism(const Options& o) {
    std::vector<std::string> mismatches;
    int compared = 0;
    for (const char* config : {"fatty_acid.json", "lactate.json"}) {
        std::vector<fs::path> dirs;
        for (int workers : {1, 8}) {
            auto cfg = shipped(o, config, workers);
            cfg.train.epochs_max = 4;
            cfg.train.episodes_per_epoch = 32;
            cfg.uncertainty.level = 0.1;
            const auto dir = fresh_dir(o, "c10_" + to_string(cfg.model) + "_w" + std::to_string(workers));
            cmd_simulate(cfg, {std::nullopt, "", 0.1, cfg.train.seed}, (dir / "simulate").string());
            cmd_train(cfg, (dir / "train").string());
            cmd_benchmark(cfg, {{0.05, 0.1}, (dir / "ckpt").string(), true}, (dir / "benchmark").string());
            if (cfg.model == ModelKind::lactate) cmd_reference(cfg, std::nullopt, (dir / "reference").string());
            dirs.push_back(dir);
        }
        for (const auto& entry : fs::recursive_directory_iterator(dirs[0])) {
            if (!entry.is_regular_file()) continue;
            const auto rel = fs::relative(entry.path(), dirs[0]);
            const auto other = dirs[1] / rel;
            ++compared;
            const bool same = rel.filename() == "training_log.csv"
                                  ? without_wall_clock(entry.path()) == without_wall_clock(other)
                                  : fs::exists(other) && slurp(entry.path()) == slurp(other);
            if (!same) mismatches.push_back(std::string(config) + ":" + rel.string());
        }
    }
    std::string detail = std::to_string(compared) + " files compared across workers 1 and 8";
    for (const auto& m : mismatches) detail += ", differs: " + m;
    return {mismatches.empty() && compared > 0, detail};
}

Outcome property_suite(const Options& o) {
    const std::string cmd = "\"" + o.unit_tests + "\" --test-case=\"property:*\" --no-intro=true > \"" +
                            (fs::path(o.work_dir) / "properties.txt").string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    std::ifstream in(fs::path(o.work_dir) / "properties.txt");
    std::string line, summary;
    while (std::getline(in, line)) {
        if (line.find("test cases:") != std::string::npos) summary = line;
    }
    return {rc == 0 && !summary.empty(), summary.empty() ? "unit test binary produced no summary" : summary};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    Options o;
    std::vector<int> expect_fail, only;
    app.add_option("--configs", o.config_dir, "directory with the shipped scenario configs")->required();
    app.add_option("--unit-tests", o.unit_tests, "path to the unit test binary")->required();
    app.add_option("--work-dir", o.work_dir, "scratch directory for artifacts")->required();
    app.add_option("--expect-fail", expect_fail, "criteria known to be unattainable (reported, not fatal)");
    app.add_option("--only", only, "run only these criteria");
    app.add_flag("--smoke", o.smoke, "smoke variant of the deterministic fatty-acid training");
    CLI11_PARSE(app, argc, argv);
    o.expect_fail.insert(expect_fail.begin(), expect_fail.end());
    o.only.insert(only.begin(), only.end());
#ifdef _OPENMP
    o.workers = std::max(1, omp_get_max_threads());
#endif

    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, [&] { return static_baseline(o, "fatty_acid.json", 1.61); }},
        {2, [&] { return static_baseline(o, "lactate.json", 2.97); }},
        {7, [&] { return gradient_oracle(); }},
        {8, [&] { return estimator_oracle(); }},
        {9, [&] { return integrator_oracle(); }},
        {10, [&] { return determinism(o); }},
        {11, [&] { return property_suite(o); }},
        {3, [&] { return deterministic_fatty_acid(o); }},
        {4, [&] { return deterministic_lactate(o); }},
        {5, [&] { return sweep(o, "fatty_acid.json", {0.10, 0.15, 0.20, 0.25}, {1.57, 1.54, 1.46, 1.38}, 25.0); }},
        {6, [&] { return sweep(o, "lactate.json", {0.05, 0.10, 0.125, 0.15}, {2.97, 2.97, 2.97, 2.97}, 8.0); }},
    };

    fs::create_directories(o.work_dir);
    int fatal = 0;
    for (const auto& [id, run] : criteria) {
        if (!o.only.empty() && !o.only.count(id)) continue;
        Outcome r;
        try {
            r = run();
        } catch (const std::exception& e) {
            r = {false, std::string("error: ") + e.what()};
        }
        const bool expected = o.expect_fail.count(id) > 0;
        std::printf("criterion %2d %s %s%s\n", id, r.pass ? "PASS" : "FAIL", r.detail.c_str(),
                    expected && !r.pass ? " (expected failure)" : "");
        std::fflush(stdout);
        if (!r.pass && !expected) ++fatal;
    }
    return fatal == 0 ? 0 : 1;
}
