#pragma once

// Gaussian control policy: a LeakyReLU MLP whose output head is squashed into
// a bounded mean and a bounded standard deviation per input channel.

#include <span>
#include <string>
#include <vector>

#include "dmc/rng.hpp"

namespace dmc {

struct PolicyBounds {
    double u_lb = 0.0;
    double u_ub = 1.0;
    double sigma_min = 1e-3;

    /// sigma_min = 1e-3 of the input range.
    static PolicyBounds for_range(double u_lb, double u_ub);
    double range() const { return u_ub - u_lb; }
    double sigma_max() const { return 0.25 * range(); }

    bool operator==(const PolicyBounds&) const = default;
};

/// Network weights in one flat row-major buffer: for each layer the
/// (out x in) weight matrix followed by its bias vector. Gradients share the layout.
struct PolicyParams {
    std::vector<std::size_t> layer_sizes;
    std::vector<double> values;
    double leaky_slope = 0.01;
    PolicyBounds bounds;

    std::size_t n_layers() const { return layer_sizes.size() - 1; }
    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t channels() const { return layer_sizes.back() / 2; }
    std::size_t weight_offset(std::size_t layer) const;
    std::size_t bias_offset(std::size_t layer) const;
    double& weight(std::size_t layer, std::size_t out, std::size_t in);
    double& bias(std::size_t layer, std::size_t out);

    static std::size_t parameter_count(std::span<const std::size_t> sizes);
    /// Throws DimensionMismatch if the sizes and buffer disagree.
    void validate() const;

    bool operator==(const PolicyParams&) const = default;
};

/// [n_s, 20, 20, 20, 20, 2 n_u]
std::vector<std::size_t> default_layer_sizes(std::size_t feature_dim, std::size_t channels = 1);

struct PolicyOutput {
    std::vector<double> mean;
    std::vector<double> stddev;
};

struct PolicySample {
    std::vector<double> applied;  // clipped to the bounds
    std::vector<double> raw;      // the Gaussian draw; log-densities use this
};

/// Kaiming-uniform weights for the LeakyReLU gain; the output layer is shrunk
/// so the initial head sits at its biases (mean at mid-range, sigma at 1/8 of the range).
PolicyParams init_policy(std::vector<std::size_t> layer_sizes, const PolicyBounds& bounds, Rng& rng,
                         double leaky_slope = 0.01);

PolicyOutput forward(const PolicyParams& theta, std::span<const double> features);
PolicySample sample(const PolicyOutput& out, const PolicyBounds& bounds, Rng& rng);
double log_prob(const PolicyOutput& out, std::span<const double> u_raw);

/// Reverse-mode gradient of log_prob(forward(theta, s), u_raw) with respect to theta.
std::vector<double> grad_log_prob(const PolicyParams& theta, std::span<const double> features,
                                  std::span<const double> u_raw);

/// Reusable buffers for repeated forward/backward passes.
struct PolicyWorkspace {
    std::vector<std::vector<double>> acts;
    std::vector<std::vector<double>> pre;
    std::vector<double> delta;
    std::vector<double> delta_prev;
};

/// Same as grad_log_prob but adds into `grad`. Returns the log-density.
double accumulate_grad_log_prob(const PolicyParams& theta, std::span<const double> features,
                                std::span<const double> u_raw, std::span<double> grad, PolicyWorkspace& ws);

void save_checkpoint(const PolicyParams& theta, const std::string& path);
PolicyParams load_checkpoint(const std::string& path);

}  // namespace dmc
