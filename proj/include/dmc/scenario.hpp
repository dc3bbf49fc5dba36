#pragma once

// Scenario configuration: one JSON document per experiment. Every field has a
// per-model default; unknown fields are rejected.

#include <cstddef>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"

#include "dmc/environment.hpp"
#include "dmc/models.hpp"
#include "dmc/sim_core.hpp"
#include "dmc/trainer.hpp"

namespace dmc {

struct ReferenceSpec {
    enum class Kind { generated, file };
    Kind kind = Kind::generated;
    std::size_t switch_index = 5;
    std::string path;

    bool operator==(const ReferenceSpec&) const = default;
};

struct ScenarioConfig {
    ModelKind model = ModelKind::fatty_acid;
    double horizon_h = 25.0;
    int n_intervals = 25;
    double u_lb = 0.0;
    double u_ub = 1000.0;
    ReturnKind return_kind = ReturnKind::terminal_titer;
    UncertaintySpec uncertainty;
    TrainConfig train;
    std::optional<ReferenceSpec> reference;  // tracking only
    IntegratorConfig integrator;
    double baseline_input = 40.0;
    std::map<std::string, double> params;         // overrides of nominal kinetic parameters
    std::map<std::string, double> initial_state;  // overrides of nominal initial conditions

    static ScenarioConfig defaults(ModelKind kind);
    void validate() const;
};

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b);

/// Throws ConfigError naming the offending field.
ScenarioConfig parse_scenario(const nlohmann::json& doc);
/// Reads and parses a file; JSON syntax errors carry line and column.
ScenarioConfig load_scenario(const std::string& path);
nlohmann::json scenario_to_json(const ScenarioConfig& cfg);

/// Equidistant breakpoints 0 .. horizon_h.
std::vector<double> scenario_breakpoints(const ScenarioConfig& cfg);

/// Resolves overrides, the reference and feature scales. Relative reference
/// paths are taken relative to `base_dir`.
Environment to_environment(const ScenarioConfig& cfg, const std::string& base_dir = ".");

}  // namespace dmc
