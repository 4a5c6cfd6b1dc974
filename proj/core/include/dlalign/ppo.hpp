#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "dlalign/neural.hpp"
#include "dlalign/rng.hpp"

namespace dlalign {

// Environment contract for the vectorized PPO loop. One instance per
// worker slot; all stochasticity flows through the Rng handed in.
class Env {
 public:
  virtual ~Env() = default;
  virtual int actor_obs_dim() const = 0;
  virtual int critic_obs_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual void reset(Rng& rng) = 0;
  virtual void observe(std::vector<double>& actor_obs,
                       std::vector<double>& critic_obs) const = 0;

  struct StepOutcome {
    double reward = 0.0;
    bool done = false;
    // episode ended by time limit / completed motion: bootstrap with V(s_T)
    bool time_limit = false;
  };
  virtual StepOutcome step(const std::vector<double>& action, Rng& rng) = 0;

  // curriculum hook, no-op for envs without one
  virtual void set_termination_threshold(double) {}
};

using EnvFactory = std::function<std::unique_ptr<Env>(int env_index)>;

struct PpoConfig {
  double gamma = 0.99;
  double lam = 0.95;
  double clip_eps = 0.2;
  int epochs = 4;
  int minibatch_size = 512;
  double lr = 3e-4;
  double lr_final = -1.0;  // linear anneal target; < 0 keeps lr constant
  double entropy_coef = 0.003;
  double value_coef = 0.5;
  double max_grad_norm = 1.0;
  int n_envs = 16;
  int rollout_steps = 128;
  std::int64_t total_steps = 1'000'000;
  std::vector<int> hidden_sizes = {64, 64};
  Activation activation = Activation::kTanh;
  double init_log_std = -1.0;

  void validate() const;
};

struct RolloutBatch {
  int n_envs = 0;
  int steps = 0;
  int actor_dim = 0;
  int critic_dim = 0;
  int act_dim = 0;
  // all [env][step] row-major, obs/action additionally by component
  std::vector<double> actor_obs, critic_obs, actions;
  std::vector<double> log_probs, rewards, values;
  std::vector<std::uint8_t> dones, time_limits;
  std::vector<double> bootstrap_values;  // V at terminal obs (time limits)
  std::vector<double> last_values;       // V at the obs after the rollout
  std::vector<double> advantages, returns;

  std::size_t flat(int env, int t) const {
    return static_cast<std::size_t>(env) * steps + t;
  }
};

// One-trajectory GAE. values has T+1 entries (bootstrap last);
// delta_t = r_t + gamma*V_{t+1}*(1-done_t) - V_t,
// A_t = delta_t + gamma*lam*(1-done_t)*A_{t+1}, returns = A + V.
void compute_gae(const std::vector<double>& rewards,
                 const std::vector<double>& values,
                 const std::vector<std::uint8_t>& dones, double gamma,
                 double lam, std::vector<double>& advantages,
                 std::vector<double>& returns);

// Fills batch.advantages / batch.returns, handling time-limit bootstraps.
void compute_gae(RolloutBatch& batch, double gamma, double lam);

struct UpdateReport {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  bool aborted = false;  // non-finite loss encountered
};

// Clipped-surrogate update over minibatches; advantages are normalized
// across the batch first. Deterministic given the rng state.
UpdateReport ppo_update(GaussianPolicy& policy, Mlp& critic,
                        const RolloutBatch& batch, const PpoConfig& config,
                        AdamState& policy_opt, AdamState& critic_opt,
                        Rng& rng);

struct UpdateLog {
  int update = 0;
  std::int64_t env_steps = 0;
  double mean_reward = 0.0;   // mean return of episodes finished so far
  double mean_ep_len = 0.0;
  double curriculum_threshold = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

struct TrainOptions {
  // maps (steps_done, total_steps) to the termination threshold
  std::function<double(std::int64_t, std::int64_t)> curriculum;
  const GaussianPolicy* init_policy = nullptr;
  const Mlp* init_critic = nullptr;
  std::function<void(const UpdateLog&)> on_update;
  // periodic access to the in-training nets (checkpoint selection)
  int snapshot_every = 0;  // updates; 0 disables
  std::function<void(const GaussianPolicy&, const Mlp&)> on_snapshot;
};

struct TrainResult {
  GaussianPolicy policy;
  Mlp critic;
  std::vector<UpdateLog> curves;
  bool diverged = false;
};

TrainResult train(const EnvFactory& factory, const PpoConfig& config,
                  std::uint64_t seed, const TrainOptions& options = {});

}  // namespace dlalign
