#include "dmc/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "dmc/error.hpp"

namespace dmc {

PolicyBounds PolicyBounds::for_range(double u_lb, double u_ub) { return {u_lb, u_ub, 1e-3 * (u_ub - u_lb)}; }

std::size_t PolicyParams::parameter_count(std::span<const std::size_t> sizes) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l + 1] * (sizes[l] + 1);
    return n;
}

std::size_t PolicyParams::weight_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) off += layer_sizes[l + 1] * (layer_sizes[l] + 1);
    return off;
}

std::size_t PolicyParams::bias_offset(std::size_t layer) const {
    return weight_offset(layer) + layer_sizes[layer + 1] * layer_sizes[layer];
}

double& PolicyParams::weight(std::size_t layer, std::size_t out, std::size_t in) {
    return values[weight_offset(layer) + out * layer_sizes[layer] + in];
}

double& PolicyParams::bias(std::size_t layer, std::size_t out) { return values[bias_offset(layer) + out]; }

void PolicyParams::validate() const {
    if (layer_sizes.size() < 2) throw DimensionMismatch("policy needs at least an input and an output layer");
    for (auto s : layer_sizes) {
        if (s == 0) throw DimensionMismatch("policy layer of width 0");
    }
    if (layer_sizes.back() % 2 != 0) throw DimensionMismatch("policy output must hold a mean and a sigma per channel");
    if (values.size() != parameter_count(layer_sizes))
        throw DimensionMismatch("policy buffer holds " + std::to_string(values.size()) + " values, layout needs " +
                                std::to_string(parameter_count(layer_sizes)));
}

std::vector<std::size_t> default_layer_sizes(std::size_t feature_dim, std::size_t channels) {
    return {feature_dim, 20, 20, 20, 20, 2 * channels};
}

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double output_layer_gain = 0.01;

// acts[0] = input, acts[l+1] = output of layer l (post-activation for hidden
// layers, raw head for the last). pre[l] = pre-activation of layer l.
void forward_pass(const PolicyParams& theta, std::span<const double> s, std::vector<std::vector<double>>& acts,
                  std::vector<std::vector<double>>& pre) {
    if (s.size() != theta.input_dim())
        throw DimensionMismatch("feature vector has " + std::to_string(s.size()) + " entries, policy expects " +
                                std::to_string(theta.input_dim()));
    const std::size_t L = theta.n_layers();
    acts.resize(L + 1);
    pre.resize(L);
    acts[0].assign(s.begin(), s.end());
    std::size_t off = 0;
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t n_in = theta.layer_sizes[l];
        const std::size_t n_out = theta.layer_sizes[l + 1];
        const double* w = theta.values.data() + off;
        const double* b = w + n_out * n_in;
        auto& z = pre[l];
        auto& a = acts[l + 1];
        z.resize(n_out);
        a.resize(n_out);
        const auto& x = acts[l];
        for (std::size_t o = 0; o < n_out; ++o) {
            double sum = b[o];
            const double* row = w + o * n_in;
            for (std::size_t i = 0; i < n_in; ++i) sum += row[i] * x[i];
            z[o] = sum;
            const bool hidden = l + 1 < L;
            a[o] = hidden && sum < 0.0 ? theta.leaky_slope * sum : sum;
        }
        off += n_out * (n_in + 1);
    }
}

PolicyOutput squash(const PolicyParams& theta, const std::vector<double>& head) {
    const auto& bd = theta.bounds;
    const std::size_t c = theta.channels();
    PolicyOutput out;
    out.mean.resize(c);
    out.stddev.resize(c);
    for (std::size_t k = 0; k < c; ++k) {
        out.mean[k] = bd.u_lb + bd.range() * logistic(head[k]);
        out.stddev[k] = bd.sigma_min + (bd.sigma_max() - bd.sigma_min) * logistic(head[c + k]);
    }
    return out;
}

}  // namespace

PolicyParams init_policy(std::vector<std::size_t> layer_sizes, const PolicyBounds& bounds, Rng& rng,
                         double leaky_slope) {
    PolicyParams theta;
    theta.layer_sizes = std::move(layer_sizes);
    theta.leaky_slope = leaky_slope;
    theta.bounds = bounds;
    theta.values.assign(PolicyParams::parameter_count(theta.layer_sizes), 0.0);
    theta.validate();

    const std::size_t L = theta.n_layers();
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t n_in = theta.layer_sizes[l];
        const std::size_t n_out = theta.layer_sizes[l + 1];
        double bound = std::sqrt(6.0 / ((1.0 + leaky_slope * leaky_slope) * static_cast<double>(n_in)));
        if (l + 1 == L) bound *= output_layer_gain;
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t o = 0; o < n_out; ++o) {
            for (std::size_t i = 0; i < n_in; ++i) theta.weight(l, o, i) = dist(rng);
        }
    }
    const double target = (0.125 * bounds.range() - bounds.sigma_min) / (bounds.sigma_max() - bounds.sigma_min);
    const double sigma_bias = std::log(target / (1.0 - target));
    for (std::size_t k = 0; k < theta.channels(); ++k) theta.bias(L - 1, theta.channels() + k) = sigma_bias;
    return theta;
}

PolicyOutput forward(const PolicyParams& theta, std::span<const double> features) {
    std::vector<std::vector<double>> acts, pre;
    forward_pass(theta, features, acts, pre);
    return squash(theta, acts.back());
}

PolicySample sample(const PolicyOutput& out, const PolicyBounds& bounds, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    PolicySample s;
    for (std::size_t k = 0; k < out.mean.size(); ++k) {
        const double raw = out.mean[k] + out.stddev[k] * normal(rng);
        s.raw.push_back(raw);
        s.applied.push_back(std::clamp(raw, bounds.u_lb, bounds.u_ub));
    }
    return s;
}

double log_prob(const PolicyOutput& out, std::span<const double> u_raw) {
    if (u_raw.size() != out.mean.size()) throw DimensionMismatch("input sample does not match policy channels");
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    double lp = 0.0;
    for (std::size_t k = 0; k < u_raw.size(); ++k) {
        const double r = (u_raw[k] - out.mean[k]) / out.stddev[k];
        lp += -half_log_2pi - std::log(out.stddev[k]) - 0.5 * r * r;
    }
    return lp;
}

double accumulate_grad_log_prob(const PolicyParams& theta, std::span<const double> features,
                                std::span<const double> u_raw, std::span<double> grad, PolicyWorkspace& ws) {
    if (grad.size() != theta.values.size()) throw DimensionMismatch("gradient buffer does not match policy");
    if (u_raw.size() != theta.channels()) throw DimensionMismatch("input sample does not match policy channels");
    const std::size_t L = theta.n_layers();
    auto& acts = ws.acts;
    auto& pre = ws.pre;
    auto& delta = ws.delta;
    auto& delta_prev = ws.delta_prev;

    forward_pass(theta, features, acts, pre);
    const auto& head = acts.back();
    const auto& bd = theta.bounds;
    const std::size_t c = theta.channels();
    const double sigma_span = bd.sigma_max() - bd.sigma_min;
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);

    double lp = 0.0;
    delta.assign(2 * c, 0.0);
    for (std::size_t k = 0; k < c; ++k) {
        const double gm = logistic(head[k]);
        const double gs = logistic(head[c + k]);
        const double m = bd.u_lb + bd.range() * gm;
        const double sigma = bd.sigma_min + sigma_span * gs;
        const double resid = u_raw[k] - m;
        const double inv_var = 1.0 / (sigma * sigma);
        lp += -half_log_2pi - std::log(sigma) - 0.5 * resid * resid * inv_var;
        const double dlp_dm = resid * inv_var;
        const double dlp_dsigma = -1.0 / sigma + resid * resid * inv_var / sigma;
        delta[k] = dlp_dm * bd.range() * gm * (1.0 - gm);
        delta[c + k] = dlp_dsigma * sigma_span * gs * (1.0 - gs);
    }

    for (std::size_t l = L; l-- > 0;) {
        const std::size_t n_in = theta.layer_sizes[l];
        const std::size_t n_out = theta.layer_sizes[l + 1];
        const std::size_t w_off = theta.weight_offset(l);
        const std::size_t b_off = w_off + n_out * n_in;
        const auto& x = acts[l];
        for (std::size_t o = 0; o < n_out; ++o) {
            const double d = delta[o];
            double* g_row = grad.data() + w_off + o * n_in;
            for (std::size_t i = 0; i < n_in; ++i) g_row[i] += d * x[i];
            grad[b_off + o] += d;
        }
        if (l == 0) break;
        delta_prev.assign(n_in, 0.0);
        const double* w = theta.values.data() + w_off;
        for (std::size_t o = 0; o < n_out; ++o) {
            const double d = delta[o];
            const double* row = w + o * n_in;
            for (std::size_t i = 0; i < n_in; ++i) delta_prev[i] += row[i] * d;
        }
        const auto& z = pre[l - 1];
        for (std::size_t i = 0; i < n_in; ++i) {
            if (z[i] < 0.0) delta_prev[i] *= theta.leaky_slope;
        }
        delta.swap(delta_prev);
    }

    return lp;
}

std::vector<double> grad_log_prob(const PolicyParams& theta, std::span<const double> features,
                                  std::span<const double> u_raw) {
    std::vector<double> grad(theta.values.size(), 0.0);
    PolicyWorkspace ws;
    accumulate_grad_log_prob(theta, features, u_raw, grad, ws);
    return grad;
}

// ---------------------------------------------------------------- checkpoint

namespace {

constexpr char checkpoint_magic[8] = {'D', 'M', 'C', 'P', 'O', 'L', 'I', 'C'};
constexpr std::uint32_t checkpoint_version = 1;

template <class T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::ifstream& in, const std::string& path) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ConfigError(path + ": truncated checkpoint");
    return v;
}

}  // namespace

void save_checkpoint(const PolicyParams& theta, const std::string& path) {
    theta.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingArtifact("cannot write " + path);
    out.write(checkpoint_magic, sizeof checkpoint_magic);
    put<std::uint32_t>(out, checkpoint_version);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(theta.layer_sizes.size()));
    for (auto s : theta.layer_sizes) put<std::uint64_t>(out, s);
    put<double>(out, theta.leaky_slope);
    put<double>(out, theta.bounds.u_lb);
    put<double>(out, theta.bounds.u_ub);
    put<double>(out, theta.bounds.sigma_min);
    put<std::uint64_t>(out, theta.values.size());
    out.write(reinterpret_cast<const char*>(theta.values.data()),
              static_cast<std::streamsize>(theta.values.size() * sizeof(double)));
    if (!out) throw std::runtime_error("failed writing " + path);
}

PolicyParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("cannot open checkpoint " + path);
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, checkpoint_magic, sizeof magic) != 0)
        throw ConfigError(path + ": not a policy checkpoint");
    const auto version = get<std::uint32_t>(in, path);
    if (version != checkpoint_version)
        throw ConfigError(path + ": unsupported checkpoint version " + std::to_string(version));
    PolicyParams theta;
    const auto n_sizes = get<std::uint32_t>(in, path);
    if (n_sizes > 64) throw ConfigError(path + ": implausible layer count");
    for (std::uint32_t i = 0; i < n_sizes; ++i) theta.layer_sizes.push_back(get<std::uint64_t>(in, path));
    theta.leaky_slope = get<double>(in, path);
    theta.bounds.u_lb = get<double>(in, path);
    theta.bounds.u_ub = get<double>(in, path);
    theta.bounds.sigma_min = get<double>(in, path);
    const auto n_values = get<std::uint64_t>(in, path);
    if (n_values != PolicyParams::parameter_count(theta.layer_sizes))
        throw ConfigError(path + ": parameter count does not match layer sizes");
    theta.values.resize(n_values);
    if (!in.read(reinterpret_cast<char*>(theta.values.data()), static_cast<std::streamsize>(n_values * sizeof(double))))
        throw ConfigError(path + ": truncated checkpoint");
    return theta;
}

}  // namespace dmc
