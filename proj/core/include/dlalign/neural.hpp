#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlalign/rng.hpp"

namespace dlalign {

enum class Activation { kTanh, kRelu };

struct MlpSpec {
  std::vector<int> layer_sizes;  // input, hidden..., output
  Activation activation = Activation::kTanh;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  // flat parameter count: sum of (n_in + 1) * n_out
  int param_count() const;
  void validate() const;
  bool operator==(const MlpSpec&) const = default;
};

// Feedforward net with a single flat 64-bit parameter vector.
// Layout per layer: weights row-major [n_out x n_in], then biases [n_out].
struct Mlp {
  MlpSpec spec;
  std::vector<double> params;

  static Mlp create(const MlpSpec& spec, Rng& rng);  // scaled-uniform init
  static Mlp zeros(const MlpSpec& spec);

  std::vector<double> forward(const std::vector<double>& input) const;
};

// Activations cached by forward_cached, consumed by backward.
struct MlpCache {
  std::vector<std::vector<double>> layer_in;  // input to each layer
};

std::vector<double> forward_cached(const Mlp& net,
                                   const std::vector<double>& input,
                                   MlpCache& cache);

// Exact reverse-mode gradients of the forward map.
// param_grad is accumulated (+=) into a vector of param_count size;
// input_grad is overwritten.
void backward(const Mlp& net, const MlpCache& cache,
              const std::vector<double>& output_grad,
              std::vector<double>& param_grad, std::vector<double>& input_grad);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;

  static AdamState zeros(std::size_t n);
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard bias-corrected adaptive moment update; rejects non-finite grads.
void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, double lr, const AdamConfig& cfg = {});

// Diagonal-Gaussian policy: MLP mean plus a learnable per-output log-std.
struct GaussianPolicy {
  Mlp mean_net;
  std::vector<double> log_std;

  static constexpr double kLogStdMin = -5.0;
  static constexpr double kLogStdMax = 1.0;

  static GaussianPolicy create(const MlpSpec& spec, Rng& rng,
                               double init_log_std = -1.0);

  int action_dim() const { return mean_net.spec.output_dim(); }
  void clamp_log_std();

  std::vector<double> mean(const std::vector<double>& obs) const {
    return mean_net.forward(obs);
  }
  std::vector<double> sample(const std::vector<double>& obs, Rng& rng) const;
  double log_prob(const std::vector<double>& obs,
                  const std::vector<double>& action) const;
  double log_prob_given_mean(const std::vector<double>& mean,
                             const std::vector<double>& action) const;
  double entropy() const;
};

// Checkpoint format, magic "DLALIGN-CKPT/1": spec + flat params
// (+ optional optimizer state), little-endian f64.
void save_checkpoint(const GaussianPolicy& policy, const std::string& path,
                     const AdamState* opt_state = nullptr);
GaussianPolicy load_checkpoint(const std::string& path,
                               AdamState* opt_state = nullptr);

void save_mlp(const Mlp& net, const std::string& path);
Mlp load_mlp(const std::string& path);

}  // namespace dlalign
