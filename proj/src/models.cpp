#include "dmc/models.hpp"

#include <algorithm>
#include <cmath>

namespace dmc {

double pow_pos(double x, double n) { return x > 0.0 ? std::pow(x, n) : 0.0; }

double hill(double x, double k, double n) {
    const double xn = pow_pos(x, n);
    return xn / (std::pow(k, n) + xn);
}

namespace {

double pos(double v) { return v > 0.0 ? v : 0.0; }

}  // namespace

// ---------------------------------------------------------------- fatty acid

FattyAcidState FattyAcidState::nominal() {
    FattyAcidState x;
    x.Xstar = 0.1107;
    x.S = 1.0 - x.Xstar;
    x.R = 0.002;
    return x;
}

FattyAcidState FattyAcidState::from(std::span<const double> x) {
    if (x.size() != size) throw DimensionMismatch("fatty-acid state needs 6 components");
    return {x[0], x[1], x[2], x[3], x[4], x[5]};
}

double toxicity_TX(double E, const FattyAcidParams& p) { return p.T_Xmax * hill(E, p.K_TX, p.n_TX); }

double toxicity_TP(double E, const FattyAcidParams& p) {
    if (E < p.E_tox) return 0.0;
    return hill(E - p.E_tox, p.K_TP, p.n_TP);
}

double fatty_acid_growth_rate(const FattyAcidState& x, const FattyAcidParams& p) {
    return p.k_X * pos(x.S) * (1.0 - toxicity_TX(pos(x.E), p));
}

FattyAcidState fatty_acid_rhs(const FattyAcidState& x, double u, const FattyAcidParams& p) {
    const double mu = fatty_acid_growth_rate(x, p);
    const double E = pos(x.E);
    const double S = pos(x.S);
    // Inducer sequesters LacI; only the free fraction represses ACC expression.
    const double free_repressor = pos(x.R) / (1.0 + pow_pos(u / p.K_I, p.n_I));
    const double k_r0n = std::pow(p.K_R0, p.n_R);
    const double expression = p.k_E * k_r0n / (k_r0n + pow_pos(free_repressor, p.n_R));

    FattyAcidState d;
    d.S = -mu * x.Xstar;
    d.Xstar = mu * x.Xstar - p.mu_d * x.Xstar;
    d.E = expression - (p.d_E + mu) * x.E;
    d.M = p.k_M * E - p.k_P * x.M - mu * x.M;
    d.R = p.k_R1 - (p.d_R + mu) * x.R;
    d.Pstar = p.k_P * pos(x.M) * pos(x.Xstar) * (S / (p.K_SP + S)) * (1.0 - toxicity_TP(E, p));
    return d;
}

void fatty_acid_rhs(std::span<const double> x, double u, const FattyAcidParams& p, std::span<double> dxdt) {
    const auto d = fatty_acid_rhs(FattyAcidState::from(x), u, p).values();
    std::copy(d.begin(), d.end(), dxdt.begin());
}

FattyAcidMeasurement fatty_acid_measure(const FattyAcidState& x, const FattyAcidParams& p) {
    return {p.H_X * x.Xstar, p.H_P * x.Pstar};
}

// ------------------------------------------------------------------- lactate

LactateState LactateState::nominal() { return {4.0, 0.075, 0.0, 0.0}; }

LactateState LactateState::from(std::span<const double> x) {
    if (x.size() != size) throw DimensionMismatch("lactate state needs 4 components");
    return {x[0], x[1], x[2], x[3]};
}

LactateRates lactate_rates(const LactateState& x, double u, const LactateParams& p) {
    const double S = pos(x.S);
    const double E = pos(x.E);
    LactateRates r;
    r.q_S = p.q_Smax * (S / (S + p.k_S)) * (1.0 + hill(E, p.k_SV, p.n_1));
    r.mu = p.Y_XS * (r.q_S - p.m_S) * (1.0 - hill(E, p.k_XV, p.n_2));
    r.q_L = (p.Y_LX * r.mu + p.m_L * S / (S + p.k_LS)) * (1.0 + hill(E, p.k_LV, p.n_3));
    r.q_E = p.q_E0 + p.q_Emax * hill(u, p.k_l, p.n_4);
    return r;
}

LactateState lactate_rhs(const LactateState& x, double u, const LactateParams& p) {
    const auto r = lactate_rates(x, u, p);
    return {-r.q_S * x.X, r.mu * x.X, r.q_L * x.X, r.q_E - p.k_d * x.E};
}

void lactate_rhs(std::span<const double> x, double u, const LactateParams& p, std::span<double> dxdt) {
    const auto d = lactate_rhs(LactateState::from(x), u, p).values();
    std::copy(d.begin(), d.end(), dxdt.begin());
}

// ------------------------------------------------------------ parameter tables

#define DMC_FIELD(P, f) ParamField<P> { #f, &P::f }

const std::array<ParamField<FattyAcidParams>, 21> fatty_acid_param_fields{{
    DMC_FIELD(FattyAcidParams, k_X),   DMC_FIELD(FattyAcidParams, k_E),    DMC_FIELD(FattyAcidParams, k_M),
    DMC_FIELD(FattyAcidParams, k_P),   DMC_FIELD(FattyAcidParams, k_R1),   DMC_FIELD(FattyAcidParams, mu_d),
    DMC_FIELD(FattyAcidParams, T_Xmax), DMC_FIELD(FattyAcidParams, E_tox), DMC_FIELD(FattyAcidParams, d_E),
    DMC_FIELD(FattyAcidParams, d_R),   DMC_FIELD(FattyAcidParams, K_TX),   DMC_FIELD(FattyAcidParams, K_TP),
    DMC_FIELD(FattyAcidParams, K_R0),  DMC_FIELD(FattyAcidParams, K_I),    DMC_FIELD(FattyAcidParams, K_SP),
    DMC_FIELD(FattyAcidParams, n_TX),  DMC_FIELD(FattyAcidParams, n_TP),   DMC_FIELD(FattyAcidParams, n_R),
    DMC_FIELD(FattyAcidParams, n_I),   DMC_FIELD(FattyAcidParams, H_X),    DMC_FIELD(FattyAcidParams, H_P),
}};

const std::array<ParamField<LactateParams>, 18> lactate_param_fields{{
    DMC_FIELD(LactateParams, q_Smax), DMC_FIELD(LactateParams, k_S),  DMC_FIELD(LactateParams, k_SV),
    DMC_FIELD(LactateParams, n_1),    DMC_FIELD(LactateParams, m_S),  DMC_FIELD(LactateParams, k_XV),
    DMC_FIELD(LactateParams, n_2),    DMC_FIELD(LactateParams, Y_XS), DMC_FIELD(LactateParams, Y_LX),
    DMC_FIELD(LactateParams, m_L),    DMC_FIELD(LactateParams, k_LS), DMC_FIELD(LactateParams, k_LV),
    DMC_FIELD(LactateParams, n_3),    DMC_FIELD(LactateParams, q_E0), DMC_FIELD(LactateParams, q_Emax),
    DMC_FIELD(LactateParams, k_l),    DMC_FIELD(LactateParams, n_4),  DMC_FIELD(LactateParams, k_d),
}};

#undef DMC_FIELD

// ----------------------------------------------------------- model dispatch

std::string to_string(ModelKind kind) { return kind == ModelKind::fatty_acid ? "fatty_acid" : "lactate"; }

ModelKind parse_model_kind(const std::string& s) {
    if (s == "fatty_acid") return ModelKind::fatty_acid;
    if (s == "lactate") return ModelKind::lactate;
    throw ConfigError("unknown model '" + s + "' (expected fatty_acid or lactate)");
}

std::shared_ptr<const StateLayout> fatty_acid_layout() {
    static const auto layout = std::make_shared<const StateLayout>(
        StateLayout{{"S", "Xstar", "E", "M", "R", "Pstar"}, std::vector<Unit>(6, Unit::dimensionless)});
    return layout;
}

std::shared_ptr<const StateLayout> lactate_layout() {
    static const auto layout = std::make_shared<const StateLayout>(
        StateLayout{{"S", "X", "L", "E"},
                    {Unit::grams_per_litre, Unit::grams_per_litre, Unit::grams_per_litre,
                     Unit::virtual_units_per_gram}});
    return layout;
}

BioModel::BioModel(ModelKind kind)
    : BioModel(kind == ModelKind::fatty_acid ? Params{FattyAcidParams{}} : Params{LactateParams{}}) {}

BioModel::BioModel(Params params)
    : kind_(std::holds_alternative<FattyAcidParams>(params) ? ModelKind::fatty_acid : ModelKind::lactate),
      params_(std::move(params)),
      layout_(kind_ == ModelKind::fatty_acid ? fatty_acid_layout() : lactate_layout()) {}

StateVector BioModel::nominal_initial_state() const {
    if (kind_ == ModelKind::fatty_acid) {
        const auto v = FattyAcidState::nominal().values();
        return StateVector({v.begin(), v.end()}, layout_);
    }
    const auto v = LactateState::nominal().values();
    return StateVector({v.begin(), v.end()}, layout_);
}

void BioModel::rhs(std::span<const double> x, double u, std::span<double> dxdt) const {
    if (const auto* fa = std::get_if<FattyAcidParams>(&params_)) {
        fatty_acid_rhs(x, u, *fa, dxdt);
    } else {
        lactate_rhs(x, u, std::get<LactateParams>(params_), dxdt);
    }
}

double BioModel::product_titer(std::span<const double> x) const {
    if (const auto* fa = std::get_if<FattyAcidParams>(&params_)) return fa->H_P * x[5];
    return x[2];
}

std::size_t BioModel::enzyme_index() const { return kind_ == ModelKind::fatty_acid ? 2 : 3; }

namespace {

template <class Params, class P, std::size_t N>
auto find_field(Params& params, const std::array<ParamField<P>, N>& fields, std::string_view name)
    -> decltype(&(params.*fields[0].member)) {
    for (const auto& f : fields) {
        if (f.name == name) return &(params.*f.member);
    }
    return nullptr;
}

/// Pointer to the named parameter inside a (possibly const) parameter variant.
template <class Variant>
auto lookup(Variant& params, std::string_view name) {
    if (auto* fa = std::get_if<FattyAcidParams>(&params)) return find_field(*fa, fatty_acid_param_fields, name);
    return find_field(std::get<LactateParams>(params), lactate_param_fields, name);
}

template <class P, std::size_t N>
std::vector<std::string> field_names(const std::array<ParamField<P>, N>& fields) {
    std::vector<std::string> out;
    for (const auto& f : fields) out.emplace_back(f.name);
    return out;
}

}  // namespace

std::vector<std::string> BioModel::param_names() const {
    return kind_ == ModelKind::fatty_acid ? field_names(fatty_acid_param_fields) : field_names(lactate_param_fields);
}

bool BioModel::has_param(std::string_view name) const { return lookup(params_, name) != nullptr; }

double BioModel::param(std::string_view name) const {
    const double* ptr = lookup(params_, name);
    if (!ptr) throw ConfigError("unknown parameter '" + std::string(name) + "' for model " + to_string(kind_));
    return *ptr;
}

void BioModel::set_param(std::string_view name, double value) {
    double* ptr = lookup(params_, name);
    if (!ptr) throw ConfigError("unknown parameter '" + std::string(name) + "' for model " + to_string(kind_));
    *ptr = value;
}

}  // namespace dmc
