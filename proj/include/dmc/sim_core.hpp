#pragma once

// Adaptive Dormand-Prince 4(5) integration of controlled ODEs over
// piecewise-constant input segments.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dmc/error.hpp"

namespace dmc {

enum class Unit { dimensionless, grams_per_litre, virtual_units_per_gram };

std::string to_string(Unit unit);

struct StateLayout {
    std::vector<std::string> labels;
    std::vector<Unit> units;

    std::size_t size() const { return labels.size(); }
    /// Index of a label, throws ConfigError if absent.
    std::size_t index_of(const std::string& label) const;
};

struct StateVector {
    std::vector<double> values;
    std::shared_ptr<const StateLayout> layout;

    StateVector() = default;
    StateVector(std::vector<double> v, std::shared_ptr<const StateLayout> l);

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    const std::string& label(std::size_t i) const { return layout->labels[i]; }
    double at(const std::string& label) const { return values[layout->index_of(label)]; }
    bool all_finite() const;
};

struct IntegratorConfig {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double initial_step_hours = 1e-3;
    double max_step_hours = 0.25;
    long max_steps_per_segment = 1'000'000;

    static constexpr double min_step_hours = 1e-12;

    /// Throws ConfigError when a field violates its range.
    void validate() const;
};

/// Piecewise-constant input: values[i] is held on [breakpoints[i], breakpoints[i+1]).
class ControlSchedule {
public:
    ControlSchedule(std::vector<double> breakpoints, std::vector<double> values, double u_lb, double u_ub);

    /// n equal intervals over [0, horizon], every value set to `u`.
    static ControlSchedule uniform(double horizon, int n_intervals, double u, double u_lb, double u_ub);

    std::size_t intervals() const { return values_.size(); }
    double horizon() const { return breakpoints_.back(); }
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<double>& values() const { return values_; }
    double lower() const { return u_lb_; }
    double upper() const { return u_ub_; }

private:
    std::vector<double> breakpoints_;
    std::vector<double> values_;
    double u_lb_;
    double u_ub_;
};

/// Clamping policy applied to a segment's end state.
enum class Positivity {
    unconstrained,
    /// Components in (-10 abs_tol, 0) snap to 0; anything more negative is a NonFiniteState failure.
    soft_floor,
};

template <class F>
concept ControlledRhs = requires(F f, double t, std::span<const double> x, double u, std::span<double> dx) {
    { f(t, x, u, dx) };
};

namespace detail {

struct Dopri5 {
    static constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
    static constexpr double a21 = 1.0 / 5.0;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                            a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                            a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                            b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
    // b - b_hat (5th minus embedded 4th order weights)
    static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                            e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
};

}  // namespace detail

/// Advance `y` in place from t0 to t1 with the input held at u.
/// Returns the number of accepted steps.
template <ControlledRhs Rhs>
long integrate_in_place(Rhs&& rhs, std::vector<double>& y, double u, double t0, double t1,
                        const IntegratorConfig& cfg) {
    using T = detail::Dopri5;
    const std::size_t n = y.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n);

    double t = t0;
    double h = std::min({cfg.initial_step_hours, cfg.max_step_hours, t1 - t0});
    long steps = 0;
    rhs(t, std::span<const double>(y), u, std::span<double>(k1));

    while (t < t1) {
        if (steps >= cfg.max_steps_per_segment) {
            throw SimulationError(SimulationError::Kind::StepLimitExceeded,
                                  "step limit exceeded at t=" + std::to_string(t));
        }
        bool last = false;
        if (t + h >= t1) {
            h = t1 - t;
            last = true;
        }

        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * T::a21 * k1[i];
        rhs(t + T::c2 * h, ytmp, u, k2);
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (T::a31 * k1[i] + T::a32 * k2[i]);
        rhs(t + T::c3 * h, ytmp, u, k3);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (T::a41 * k1[i] + T::a42 * k2[i] + T::a43 * k3[i]);
        rhs(t + T::c4 * h, ytmp, u, k4);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (T::a51 * k1[i] + T::a52 * k2[i] + T::a53 * k3[i] + T::a54 * k4[i]);
        rhs(t + T::c5 * h, ytmp, u, k5);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (T::a61 * k1[i] + T::a62 * k2[i] + T::a63 * k3[i] + T::a64 * k4[i] +
                                  T::a65 * k5[i]);
        rhs(t + h, ytmp, u, k6);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (T::b1 * k1[i] + T::b3 * k3[i] + T::b4 * k4[i] + T::b5 * k5[i] +
                                  T::b6 * k6[i]);
        rhs(t + h, ynew, u, k7);

        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double ei = h * (T::e1 * k1[i] + T::e3 * k3[i] + T::e4 * k4[i] + T::e5 * k5[i] +
                                   T::e6 * k6[i] + T::e7 * k7[i]);
            const double scale = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err = std::max(err, std::abs(ei) / scale);
        }
        // NaN compares false everywhere; route it to rejection explicitly.
        if (!std::isfinite(err)) err = 1e10;

        if (err <= 1.0) {
            t = last ? t1 : t + h;
            y.swap(ynew);
            k1.swap(k7);
            ++steps;
            const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            h = std::min(h * factor, cfg.max_step_hours);
        } else {
            h *= std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
            if (h < IntegratorConfig::min_step_hours) {
                throw SimulationError(SimulationError::Kind::NonFiniteState,
                                      "step size underflow at t=" + std::to_string(t));
            }
        }
    }

    for (double v : y) {
        if (!std::isfinite(v)) {
            throw SimulationError(SimulationError::Kind::NonFiniteState,
                                  "non-finite state at t=" + std::to_string(t1));
        }
    }
    return steps;
}

void apply_positivity(std::vector<double>& y, Positivity positivity, const IntegratorConfig& cfg);

/// x(t1) from x(t0) under constant input u.
template <ControlledRhs Rhs>
StateVector integrate_segment(Rhs&& rhs, const StateVector& x, double u, double t0, double t1,
                              const IntegratorConfig& cfg,
                              Positivity positivity = Positivity::unconstrained) {
    if (!(t1 > t0)) throw ConfigError("integrate_segment: t1 must exceed t0");
    StateVector out = x;
    integrate_in_place(rhs, out.values, u, t0, t1, cfg);
    apply_positivity(out.values, positivity, cfg);
    return out;
}

/// States at every breakpoint; element 0 is x0. Integration restarts at each breakpoint.
template <ControlledRhs Rhs>
std::vector<StateVector> rollout(Rhs&& rhs, const StateVector& x0, const ControlSchedule& schedule,
                                 const IntegratorConfig& cfg,
                                 Positivity positivity = Positivity::unconstrained) {
    std::vector<StateVector> states;
    states.reserve(schedule.intervals() + 1);
    states.push_back(x0);
    const auto& bp = schedule.breakpoints();
    for (std::size_t k = 0; k < schedule.intervals(); ++k) {
        try {
            states.push_back(
                integrate_segment(rhs, states.back(), schedule.values()[k], bp[k], bp[k + 1], cfg, positivity));
        } catch (const SimulationError& e) {
            throw SimulationError(e.kind(), "segment " + std::to_string(k) + ": " + e.what());
        }
    }
    return states;
}

}  // namespace dmc
