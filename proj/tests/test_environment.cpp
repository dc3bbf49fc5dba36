#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "dmc/environment.hpp"
#include "dmc/scenario.hpp"
#include "oracles.hpp"

using namespace dmc;
using doctest::Approx;

namespace {

struct Moments {
    double mean = 0.0;
    double sd = 0.0;
};

Moments moments(const std::vector<double>& v) {
    Moments m;
    for (double x : v) m.mean += x;
    m.mean /= static_cast<double>(v.size());
    for (double x : v) m.sd += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(m.sd / static_cast<double>(v.size()));
    return m;
}

std::vector<double> draws(ModelKind kind, double level, const std::string& param, int n) {
    const BioModel model(kind);
    const auto spec = UncertaintySpec::defaults(kind, level);
    std::vector<double> out;
    out.reserve(n);
    for (int k = 0; k < n; ++k) {
        const StreamId id{7, StreamFamily::test, 0, static_cast<std::uint64_t>(k)};
        Rng rng = make_stream(id);
        out.push_back(randomize(model.nominal_initial_state(), model, spec, rng, id).model.param(param));
    }
    return out;
}

Environment lactate_env() { return to_environment(ScenarioConfig::defaults(ModelKind::lactate)); }

}  // namespace

TEST_CASE("level zero leaves the nominal context untouched") {
    const BioModel model(ModelKind::fatty_acid);
    Rng rng = make_stream({1, StreamFamily::test, 0, 0});
    const auto ctx = randomize(model.nominal_initial_state(), model,
                               UncertaintySpec::defaults(ModelKind::fatty_acid, 0.0), rng);
    CHECK(ctx.initial_state.values == model.nominal_initial_state().values);
    for (const auto& name : model.param_names()) CHECK(ctx.model.param(name) == model.param(name));
}

TEST_CASE("sampler spread matches level times nominal") {
    const auto k_E = moments(draws(ModelKind::fatty_acid, 0.10, "k_E", 100000));
    CHECK(k_E.sd == Approx(0.06088).epsilon(0.03));
    CHECK(k_E.mean == Approx(0.6088).epsilon(0.01));
    const auto q = moments(draws(ModelKind::lactate, 0.15, "q_Emax", 100000));
    CHECK(q.sd == Approx(1.5).epsilon(0.03));
    CHECK(q.mean == Approx(10.0).epsilon(0.01));
}

TEST_CASE("initial-condition draws are zero-mean and keep zero nominals at zero") {
    const BioModel model(ModelKind::fatty_acid);
    const auto spec = UncertaintySpec::defaults(ModelKind::fatty_acid, 0.25);
    std::vector<double> xs, rs;
    for (int k = 0; k < 100000; ++k) {
        Rng rng = make_stream({3, StreamFamily::test, 1, static_cast<std::uint64_t>(k)});
        const auto ctx = randomize(model.nominal_initial_state(), model, spec, rng);
        xs.push_back(ctx.initial_state.at("Xstar"));
        rs.push_back(ctx.initial_state.at("R"));
        REQUIRE(ctx.initial_state.at("E") == 0.0);
        REQUIRE(ctx.initial_state.at("S") > 0.0);
    }
    CHECK(moments(xs).mean == Approx(0.1107).epsilon(0.01));
    CHECK(moments(rs).mean == Approx(0.002).epsilon(0.01));
}

TEST_CASE("negative draws are resampled, then floored") {
    const BioModel model(ModelKind::lactate);
    UncertaintySpec spec = UncertaintySpec::defaults(ModelKind::lactate, 5.0);
    int floored = 0;
    for (int k = 0; k < 2000; ++k) {
        Rng rng = make_stream({5, StreamFamily::test, 0, static_cast<std::uint64_t>(k)});
        const auto ctx = randomize(model.nominal_initial_state(), model, spec, rng);
        REQUIRE(ctx.model.param("q_Emax") > 0.0);
        REQUIRE(ctx.initial_state.at("X") > 0.0);
    }
    spec.resample_attempts = 0;
    for (int k = 0; k < 2000; ++k) {
        Rng rng = make_stream({5, StreamFamily::test, 1, static_cast<std::uint64_t>(k)});
        const auto ctx = randomize(model.nominal_initial_state(), model, spec, rng);
        REQUIRE(ctx.model.param("q_Emax") >= UncertaintySpec::positivity_floor);
        if (ctx.model.param("q_Emax") == UncertaintySpec::positivity_floor) ++floored;
    }
    CHECK(floored > 0);
}

TEST_CASE("uncertainty spec validation") {
    const BioModel model(ModelKind::fatty_acid);
    auto spec = UncertaintySpec::defaults(ModelKind::fatty_acid, 0.1);
    CHECK_NOTHROW(spec.validate(model));
    spec.param_targets.push_back("q_Emax");
    CHECK_THROWS_AS(spec.validate(model), ConfigError);
    spec = UncertaintySpec::defaults(ModelKind::fatty_acid, -0.1);
    CHECK_THROWS_AS(spec.validate(model), ConfigError);
    spec = UncertaintySpec::defaults(ModelKind::fatty_acid, 0.1);
    spec.ic_targets.push_back("L");
    CHECK_THROWS_AS(spec.validate(model), ConfigError);
}

TEST_CASE("randomization is a function of the stream id") {
    const BioModel model(ModelKind::fatty_acid);
    const auto spec = UncertaintySpec::defaults(ModelKind::fatty_acid, 0.2);
    const StreamId id{42, StreamFamily::training, 3, 17};
    Rng a = make_stream(id), b = make_stream(id);
    const auto ca = randomize(model.nominal_initial_state(), model, spec, a, id);
    const auto cb = randomize(model.nominal_initial_state(), model, spec, b, id);
    CHECK(ca.initial_state.values == cb.initial_state.values);
    CHECK(ca.model.param("k_R1") == cb.model.param("k_R1"));
    Rng c = make_stream({42, StreamFamily::training, 3, 18});
    CHECK(randomize(model.nominal_initial_state(), model, spec, c).model.param("k_E") != ca.model.param("k_E"));
}

TEST_CASE("feature endpoints") {
    const auto scales = FeatureScales::defaults(ModelKind::lactate, 0.0, 873.0);
    std::vector<double> x{4.0, 0.0, 2.5, 10.0};
    auto f = build_features(std::nullopt, {x, 873.0 / 2.0}, 0.0, 9.5, scales);
    REQUIRE(f.size() == feature_dimension(4));
    CHECK(f.size() == 11);
    CHECK(f.back() == -1.0);
    CHECK(f[5] == 1.0);    // S at its scale
    CHECK(f[6] == -1.0);   // X = 0
    CHECK(f[7] == Approx(0.0));
    CHECK(f[9] == Approx(0.0));  // u = u_ub / 2
    CHECK(f[4] == -1.0);   // missing previous input counts as 0
    for (std::size_t i = 0; i < 4; ++i) CHECK(f[i] == f[i + 5]);
    f = build_features(StateInputPair{x, 873.0}, {x, 0.0}, 9.5, 9.5, scales);
    CHECK(f.back() == 1.0);
    CHECK(f[4] == 1.0);
    CHECK(feature_dimension(6) == 15);
    CHECK_THROWS_AS(build_features(std::nullopt, {std::vector<double>{1.0}, 0.0}, 0.0, 9.5, scales),
                    DimensionMismatch);
    const std::vector<double> bad{NAN, 0.0, 0.0, 0.0};
    CHECK_THROWS_AS(build_features(std::nullopt, {bad, 0.0}, 0.0, 9.5, scales), SimulationError);
}

TEST_CASE("property: features stay within [-1, 1]") {
    oracle::Gen g(21);
    for (int i = 0; i < 10000; ++i) {
        const bool fatty = i % 2 == 0;
        const auto kind = fatty ? ModelKind::fatty_acid : ModelKind::lactate;
        const double ub = fatty ? 1000.0 : 873.0;
        const auto scales = FeatureScales::defaults(kind, 0.0, ub);
        const std::size_t n = scales.state.size();
        std::vector<double> prev(n), curr(n);
        for (std::size_t j = 0; j < n; ++j) {
            prev[j] = g.uniform(0.0, 3.0 * scales.state[j]);
            curr[j] = g.uniform(0.0, 3.0 * scales.state[j]);
        }
        const double horizon = fatty ? 25.0 : 9.5;
        std::optional<StateInputPair> p;
        if (i % 3) p = StateInputPair{prev, g.uniform(0.0, ub)};
        const auto f = build_features(p, {curr, g.uniform(0.0, ub)}, g.uniform(0.0, horizon), horizon, scales);
        REQUIRE(f.size() == feature_dimension(n));
        for (double v : f) REQUIRE((v >= -1.0 && v <= 1.0));
    }
}

TEST_CASE("terminal titer return") {
    const Environment env = to_environment(ScenarioConfig::defaults(ModelKind::fatty_acid));
    const std::vector<double> zeros(env.intervals(), 0.0);
    Trajectory traj;
    traj.times = env.breakpoints;
    traj.intervals = env.intervals();
    traj.states.assign(env.intervals() + 1, env.initial_state.values);
    CHECK(reward_terminal_titer(traj, env.model) == 0.0);
    // Without inducer, leaky ACC expression still yields product once malonyl-CoA appears.
    const double uninduced = reward_terminal_titer(simulate_inputs(env, nominal_context(env), zeros), env.model);
    const std::vector<double> forty(env.intervals(), 40.0);
    traj = simulate_inputs(env, nominal_context(env), forty);
    CHECK(uninduced < reward_terminal_titer(traj, env.model));
    CHECK(reward_terminal_titer(traj, env.model) == Approx(1.61).epsilon(0.02));
    CHECK(traj.total_reward() == reward_terminal_titer(traj, env.model));
    for (std::size_t k = 0; k + 1 < traj.rewards.size(); ++k) CHECK(traj.rewards[k] == 0.0);
    traj.states.pop_back();
    CHECK_THROWS_AS(reward_terminal_titer(traj, env.model), IncompleteTrajectory);
}

TEST_CASE("tracking return") {
    const Environment env = lactate_env();
    const auto& ref = *env.reference;
    Trajectory traj;
    traj.times = env.breakpoints;
    traj.intervals = env.intervals();
    for (double e : ref.e_ref) traj.states.push_back({4.0, 0.1, 0.0, e});
    CHECK(reward_tracking(traj, ref, 3) == 0.0);
    const double delta = 0.3;
    for (auto& x : traj.states) x[3] += delta;
    CHECK(reward_tracking(traj, ref, 3) == Approx(-11.0 * delta * delta));
    double tail = 0.0;
    for (std::size_t k = 1; k < ref.e_ref.size(); ++k) tail += ref.e_ref[k] * ref.e_ref[k];
    for (auto& x : traj.states) x[3] = 0.0;
    CHECK(reward_tracking(traj, ref, 3) == Approx(-tail));
    traj.times[4] += 0.01;
    CHECK_THROWS_AS(reward_tracking(traj, ref, 3), BreakpointMismatch);
}

TEST_CASE("property: returns have their signs") {
    const Environment fa = to_environment(ScenarioConfig::defaults(ModelKind::fatty_acid));
    const Environment la = lactate_env();
    oracle::Gen g(22);
    for (int i = 0; i < 40; ++i) {
        std::vector<double> u(fa.intervals());
        for (auto& v : u) v = g.uniform(0.0, 1000.0);
        CHECK(reward_terminal_titer(simulate_inputs(fa, nominal_context(fa), u), fa.model) >= 0.0);
        std::vector<double> w(la.intervals());
        for (auto& v : w) v = g.uniform(0.0, 873.0);
        EpisodeSim sim(la, nominal_context(la));
        for (double v : w) CHECK(sim.step(v) <= 0.0);
        CHECK(sim.episode_return() <= 0.0);
    }
}

TEST_CASE("generated references") {
    const LactateParams p;
    const auto bp = ControlSchedule::uniform(9.5, 11, 0.0, 0.0, 873.0).breakpoints();
    const IntegratorConfig cfg;
    const auto full = generate_reference(p, bp, 0, 873.0, cfg);
    for (std::size_t k = 1; k < full.e_ref.size(); ++k) CHECK(full.e_ref[k] > full.e_ref[k - 1]);
    CHECK(full.e_ref.back() == Approx(9.9417).epsilon(0.01));
    const auto never = generate_reference(p, bp, 11, 873.0, cfg);
    for (double e : never.e_ref) CHECK(e < 1e-5);
    for (std::size_t sw : {5u, 6u}) {
        const auto r = generate_reference(p, bp, sw, 873.0, cfg);
        for (std::size_t k = 0; k <= sw; ++k) CHECK(r.e_ref[k] < 1e-5);
        for (std::size_t k = sw + 1; k < r.e_ref.size(); ++k) CHECK(r.e_ref[k] > r.e_ref[k - 1]);
        CHECK(r.e_ref.back() == Approx(9.9).epsilon(0.02));
    }
}

TEST_CASE("reference CSV round-trip") {
    const auto env = lactate_env();
    const auto path = (std::filesystem::temp_directory_path() / "dmc_ref_roundtrip.csv").string();
    write_reference_csv(*env.reference, path);
    const auto back = read_reference_csv(path);
    CHECK(back.times == env.reference->times);
    CHECK(back.e_ref == env.reference->e_ref);
    CHECK_THROWS_AS(read_reference_csv(path + ".missing"), MissingArtifact);
}

TEST_CASE("episode stepping") {
    const auto env = lactate_env();
    EpisodeSim sim(env, nominal_context(env));
    CHECK(sim.features().size() == env.feature_dim());
    sim.step(5000.0);
    CHECK(sim.trajectory().inputs[0] == 873.0);
    sim.step(-10.0);
    CHECK(sim.trajectory().inputs[1] == 0.0);
    while (!sim.done()) sim.step(0.0);
    CHECK(sim.trajectory().complete());
    CHECK(sim.trajectory().features.size() == env.intervals());
    CHECK_THROWS_AS(sim.step(0.0), IncompleteTrajectory);
    CHECK_THROWS_AS(simulate_inputs(env, nominal_context(env), std::vector<double>(3, 0.0)), ConfigError);
}
