#pragma once

// Kinetic models for the two case studies: fatty-acid synthesis with ACC
// induction (LacI-repressed, inducer u) and lactate synthesis with
// light-driven ATPase expression (photon flux u).

#include <array>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dmc/sim_core.hpp"

namespace dmc {

/// x^n for x > 0, and exactly 0 otherwise (fractional exponents included).
double pow_pos(double x, double n);

/// x^n / (k^n + x^n) with the 0^n = 0 convention.
double hill(double x, double k, double n);

// ---------------------------------------------------------------- fatty acid

struct FattyAcidParams {
    double k_X = 0.4639;     // 1/h
    double k_E = 0.6088;     // 1/h
    double k_M = 0.4314;     // 1/h
    double k_P = 0.4314;     // 1/h
    double k_R1 = 17.77;     // 1/h
    double mu_d = 0.00763;   // 1/h
    double T_Xmax = 0.5081;
    double E_tox = 1.0;
    double d_E = 0.1131;     // 1/h
    double d_R = 1.386;      // 1/h
    double K_TX = 0.4587;
    double K_TP = 0.3445;
    double K_R0 = 1.0;
    double K_I = 17.61;      // uM
    double K_SP = 0.01397;
    double n_TX = 2.798;
    double n_TP = 1.137;
    double n_R = 0.5576;
    double n_I = 1.034;
    double H_X = 1.688;
    double H_P = 0.4843;     // g/L
};

struct FattyAcidState {
    double S = 0.0, Xstar = 0.0, E = 0.0, M = 0.0, R = 0.0, Pstar = 0.0;

    static constexpr std::size_t size = 6;
    static FattyAcidState nominal();
    static FattyAcidState from(std::span<const double> x);
    std::array<double, size> values() const { return {S, Xstar, E, M, R, Pstar}; }
};

struct FattyAcidMeasurement {
    double X;  // relative cell density
    double P;  // g/L
};

double toxicity_TX(double E, const FattyAcidParams& p);
double toxicity_TP(double E, const FattyAcidParams& p);
double fatty_acid_growth_rate(const FattyAcidState& x, const FattyAcidParams& p);
FattyAcidState fatty_acid_rhs(const FattyAcidState& x, double u, const FattyAcidParams& p);
void fatty_acid_rhs(std::span<const double> x, double u, const FattyAcidParams& p, std::span<double> dxdt);
FattyAcidMeasurement fatty_acid_measure(const FattyAcidState& x, const FattyAcidParams& p);

// ------------------------------------------------------------------- lactate

struct LactateParams {
    double q_Smax = 1.731;    // g/(g h)
    double k_S = 5.340e-7;    // g/L
    double k_SV = 1.053e-6;   // VU/g
    double n_1 = 1.000e-2;
    double m_S = 1.232e-6;    // g/(g h)
    double k_XV = 2.605e-4;   // VU/g
    double n_2 = 1.028e-1;
    double Y_XS = 1.083e-1;   // g/g
    double Y_LX = 2.204;      // g/g
    double m_L = 1.910;       // g/(g h)
    double k_LS = 1.0e-10;    // g/L
    double k_LV = 10.02;      // VU/g
    double n_3 = 10.0;
    double q_E0 = 1.000e-6;   // VU/(g h)
    double q_Emax = 10.0;     // VU/(g h)
    double k_l = 3.729e2;     // umol m^-2 s^-1
    double n_4 = 4.718;
    double k_d = 0.988;       // 1/h
};

struct LactateState {
    double S = 0.0, X = 0.0, L = 0.0, E = 0.0;

    static constexpr std::size_t size = 4;
    static LactateState nominal();
    static LactateState from(std::span<const double> x);
    std::array<double, size> values() const { return {S, X, L, E}; }
};

struct LactateRates {
    double q_S;
    double mu;
    double q_L;
    double q_E;
};

LactateRates lactate_rates(const LactateState& x, double u, const LactateParams& p);
LactateState lactate_rhs(const LactateState& x, double u, const LactateParams& p);
void lactate_rhs(std::span<const double> x, double u, const LactateParams& p, std::span<double> dxdt);

// ------------------------------------------------------------ parameter tables

template <class P>
struct ParamField {
    std::string_view name;
    double P::*member;
};

extern const std::array<ParamField<FattyAcidParams>, 21> fatty_acid_param_fields;
extern const std::array<ParamField<LactateParams>, 18> lactate_param_fields;

// ----------------------------------------------------------- model dispatch

enum class ModelKind { fatty_acid, lactate };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& s);

/// A bound model: kind plus a concrete parameter set, with name-based access
/// for randomization and config round-trips.
class BioModel {
public:
    using Params = std::variant<FattyAcidParams, LactateParams>;

    explicit BioModel(ModelKind kind);
    explicit BioModel(Params params);

    ModelKind kind() const { return kind_; }
    const Params& params() const { return params_; }
    const std::shared_ptr<const StateLayout>& layout() const { return layout_; }
    std::size_t state_size() const { return layout_->size(); }

    StateVector nominal_initial_state() const;

    void rhs(std::span<const double> x, double u, std::span<double> dxdt) const;

    /// Product titer in g/L (H_P P* or L).
    double product_titer(std::span<const double> x) const;
    /// Index of the manipulated enzyme state E.
    std::size_t enzyme_index() const;

    std::vector<std::string> param_names() const;
    double param(std::string_view name) const;
    void set_param(std::string_view name, double value);
    bool has_param(std::string_view name) const;

private:
    ModelKind kind_;
    Params params_;
    std::shared_ptr<const StateLayout> layout_;
};

std::shared_ptr<const StateLayout> fatty_acid_layout();
std::shared_ptr<const StateLayout> lactate_layout();

}  // namespace dmc
