#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dmc/error.hpp"
#include "dmc/scenario.hpp"

using namespace dmc;
using nlohmann::json;

namespace {

std::string config_error(const json& doc) {
    try {
        parse_scenario(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("dmc_scenario_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("scenario defaults per model") {
    const auto fa = parse_scenario(json{{"model", "fatty_acid"}});
    CHECK(fa == ScenarioConfig::defaults(ModelKind::fatty_acid));
    CHECK(fa.horizon_h == 25.0);
    CHECK(fa.n_intervals == 25);
    CHECK(fa.u_ub == 1000.0);
    CHECK(fa.return_kind == ReturnKind::terminal_titer);
    CHECK_FALSE(fa.reference.has_value());
    CHECK(fa.train.epochs_max == 350);

    const auto la = parse_scenario(json{{"model", "lactate"}});
    CHECK(la.horizon_h == 9.5);
    CHECK(la.n_intervals == 11);
    CHECK(la.u_ub == 873.0);
    CHECK(la.return_kind == ReturnKind::tracking);
    REQUIRE(la.reference.has_value());
    CHECK(la.reference->switch_index == 5);
    CHECK(la.train.learning_rate == 0.001);
}

TEST_CASE("scenario round-trips through JSON") {
    for (const char* path : {"fatty_acid.json", "lactate.json"}) {
        CAPTURE(path);
        const auto cfg = load_scenario(std::string(DMC_CONFIG_DIR) + "/" + path);
        const auto doc = scenario_to_json(cfg);
        const auto back = parse_scenario(doc);
        CHECK(back == cfg);
        CHECK(scenario_to_json(back) == doc);
    }

    auto cfg = ScenarioConfig::defaults(ModelKind::lactate);
    cfg.uncertainty.level = 0.125;
    cfg.train.optimizer.kind = OptimizerConfig::Kind::adam;
    cfg.train.optimizer.beta2 = 0.99;
    cfg.params["q_Emax"] = 0.0123;
    cfg.initial_state["S"] = 35.0;
    cfg.reference = ReferenceSpec{ReferenceSpec::Kind::file, 5, "ref.csv"};
    CHECK(parse_scenario(scenario_to_json(cfg)) == cfg);
}

TEST_CASE("unknown fields are rejected by name") {
    CHECK(config_error(json{{"model", "fatty_acid"}, {"horizon", 25}}).find("'horizon'") != std::string::npos);
    const auto nested = config_error(json{{"model", "lactate"}, {"train", {{"lr", 0.1}}}});
    CHECK(nested.find("'train.lr'") != std::string::npos);
    CHECK(nested.find("unknown field") != std::string::npos);
    CHECK(config_error(json{{"model", "lactate"}, {"uncertainty", {{"sigma", 1}}}}).find("'uncertainty.sigma'") !=
          std::string::npos);
}

TEST_CASE("invalid values name their field") {
    CHECK(config_error(json::object()).find("'model'") != std::string::npos);
    CHECK(config_error(json{{"model", "yeast"}}).find("'model'") != std::string::npos);
    CHECK(config_error(json{{"model", "fatty_acid"}, {"n_intervals", "25"}}).find("'n_intervals'") !=
          std::string::npos);
    CHECK(config_error(json{{"model", "fatty_acid"}, {"n_intervals", 2.5}}).find("'n_intervals'") !=
          std::string::npos);
    CHECK(config_error(json{{"model", "fatty_acid"}, {"input_bounds", {5}}}).find("'input_bounds'") !=
          std::string::npos);
    CHECK(config_error(json{{"model", "fatty_acid"}, {"input_bounds", {5, 1}}}).find("'input_bounds'") !=
          std::string::npos);
    CHECK(config_error(json{{"model", "fatty_acid"}, {"return_kind", "tracking"}}).find("'return_kind'") !=
          std::string::npos);
    CHECK(config_error(json{{"model", "lactate"}, {"uncertainty", {{"distribution", "uniform"}}}})
              .find("'uncertainty.distribution'") != std::string::npos);
    CHECK(config_error(json{{"model", "lactate"}, {"train", {{"optimizer", {{"kind", "rmsprop"}}}}}})
              .find("'train.optimizer.kind'") != std::string::npos);
    CHECK(config_error(json{{"model", "lactate"}, {"train", {{"seed", -1}}}}).find("'train.seed'") !=
          std::string::npos);
    CHECK(config_error(json{{"model", "lactate"}, {"train", {{"learning_rate", 0}}}}).find("train") !=
          std::string::npos);
    CHECK(config_error(json{{"model", "lactate"}, {"reference", {{"switch_index", 12}}}})
              .find("'reference.switch_index'") != std::string::npos);
    CHECK(config_error(json{{"model", "lactate"}, {"reference", {{"kind", "file"}}}}).find("'reference.path'") !=
          std::string::npos);
    CHECK(config_error(json{{"model", "fatty_acid"}, {"params", {{"k_Z", 1.0}}}}).find("'params.k_Z'") !=
          std::string::npos);
    CHECK(config_error(json{{"model", "fatty_acid"}, {"initial_state", {{"S", -1.0}}}})
              .find("'initial_state.S'") != std::string::npos);
    CHECK(config_error(json{{"model", "fatty_acid"}, {"uncertainty", {{"param_targets", {"nope"}}}}})
              .find("uncertainty") != std::string::npos);
}

TEST_CASE("syntax errors report the position") {
    const auto dir = scratch("syntax");
    const auto path = (dir / "bad.json").string();
    std::ofstream(path) << "{\n  \"model\": \"lactate\",\n  \"horizon_h\": ,\n}\n";
    try {
        load_scenario(path);
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(load_scenario((dir / "absent.json").string()), MissingArtifact);
}

TEST_CASE("environment applies overrides and the reference") {
    auto cfg = ScenarioConfig::defaults(ModelKind::fatty_acid);
    cfg.params["k_E"] = 2.5;
    cfg.initial_state["S"] = 12.0;
    cfg.uncertainty.level = 0.05;
    const auto env = to_environment(cfg);
    CHECK(env.model.param("k_E") == 2.5);
    CHECK(env.initial_state.at("S") == 12.0);
    CHECK(env.uncertainty.level == 0.05);
    CHECK(env.breakpoints.size() == 26);
    CHECK(env.breakpoints.back() == 25.0);
    CHECK_FALSE(env.reference.has_value());

    const auto la_cfg = ScenarioConfig::defaults(ModelKind::lactate);
    const auto la = to_environment(la_cfg);
    REQUIRE(la.reference.has_value());
    CHECK(la.reference->e_ref.size() == 12);
    CHECK(la.reference->e_ref[5] < 1e-3 * la.reference->e_ref[11]);
    CHECK(la.reference->e_ref[11] > 0.0);

    const auto dir = scratch("reference");
    write_reference_csv(*la.reference, (dir / "ref.csv").string());
    auto file_cfg = la_cfg;
    file_cfg.reference = ReferenceSpec{ReferenceSpec::Kind::file, 5, "ref.csv"};
    const auto from_file = to_environment(file_cfg, dir.string());
    REQUIRE(from_file.reference.has_value());
    CHECK(from_file.reference->e_ref == la.reference->e_ref);

    file_cfg.reference->path = "missing.csv";
    CHECK_THROWS_AS(to_environment(file_cfg, dir.string()), MissingArtifact);
}
