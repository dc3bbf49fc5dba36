#include "dmc/sim_core.hpp"

#include <algorithm>

namespace dmc {

std::string to_string(Unit unit) {
    switch (unit) {
        case Unit::dimensionless: return "-";
        case Unit::grams_per_litre: return "g/L";
        case Unit::virtual_units_per_gram: return "VU/g";
    }
    return "?";
}

std::size_t StateLayout::index_of(const std::string& label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw ConfigError("unknown state '" + label + "'");
    return static_cast<std::size_t>(it - labels.begin());
}

StateVector::StateVector(std::vector<double> v, std::shared_ptr<const StateLayout> l)
    : values(std::move(v)), layout(std::move(l)) {
    if (layout && layout->size() != values.size()) {
        throw DimensionMismatch("state has " + std::to_string(values.size()) + " values but " +
                                std::to_string(layout->size()) + " labels");
    }
}

bool StateVector::all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void IntegratorConfig::validate() const {
    if (!(rel_tol > 0.0)) throw ConfigError("integrator.rel_tol must be > 0");
    if (!(abs_tol > 0.0)) throw ConfigError("integrator.abs_tol must be > 0");
    if (!(initial_step_hours > 0.0)) throw ConfigError("integrator.initial_step_hours must be > 0");
    if (!(max_step_hours >= initial_step_hours))
        throw ConfigError("integrator.max_step_hours must be >= initial_step_hours");
    if (max_steps_per_segment < 1) throw ConfigError("integrator.max_steps_per_segment must be >= 1");
}

ControlSchedule::ControlSchedule(std::vector<double> breakpoints, std::vector<double> values, double u_lb,
                                 double u_ub)
    : breakpoints_(std::move(breakpoints)), values_(std::move(values)), u_lb_(u_lb), u_ub_(u_ub) {
    if (values_.empty()) throw ConfigError("control schedule needs at least one interval");
    if (breakpoints_.size() != values_.size() + 1)
        throw ConfigError("control schedule needs one more breakpoint than values");
    if (breakpoints_.front() != 0.0) throw ConfigError("control schedule must start at t = 0");
    for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
        if (!(breakpoints_[i] > breakpoints_[i - 1]))
            throw ConfigError("control schedule breakpoints must be strictly increasing");
    }
    if (!(u_lb_ <= u_ub_)) throw ConfigError("control schedule bounds inverted");
    for (double v : values_) {
        if (!(v >= u_lb_ && v <= u_ub_)) {
            throw ConfigError("control value " + std::to_string(v) + " outside [" + std::to_string(u_lb_) +
                              ", " + std::to_string(u_ub_) + "]");
        }
    }
}

ControlSchedule ControlSchedule::uniform(double horizon, int n_intervals, double u, double u_lb, double u_ub) {
    if (n_intervals < 1) throw ConfigError("control schedule needs at least one interval");
    std::vector<double> bp(static_cast<std::size_t>(n_intervals) + 1);
    for (int i = 0; i <= n_intervals; ++i) bp[i] = horizon * i / n_intervals;
    bp.back() = horizon;
    return ControlSchedule(std::move(bp), std::vector<double>(n_intervals, u), u_lb, u_ub);
}

void apply_positivity(std::vector<double>& y, Positivity positivity, const IntegratorConfig& cfg) {
    if (positivity == Positivity::unconstrained) return;
    const double floor = -10.0 * cfg.abs_tol;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] >= 0.0) continue;
        if (y[i] > floor) {
            y[i] = 0.0;
        } else {
            throw SimulationError(SimulationError::Kind::NonFiniteState,
                                  "component " + std::to_string(i) + " went negative (" + std::to_string(y[i]) +
                                      ")");
        }
    }
}

}  // namespace dmc
