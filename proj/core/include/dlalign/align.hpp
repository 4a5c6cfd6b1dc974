#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dlalign/dynamics.hpp"
#include "dlalign/neural.hpp"
#include "dlalign/ppo.hpp"
#include "dlalign/reference.hpp"
#include "dlalign/tracking.hpp"

namespace dlalign {

// Recorded control-rate rollouts from the "real" (gapped) simulator.
struct TrajectoryEpisode {
  std::string motion_name;
  bool diverged = false;
  std::vector<std::vector<double>> q;   // [step][joint], length T+1
  std::vector<std::vector<double>> qd;  // [step][joint], length T+1
  std::vector<std::vector<double>> actions;  // [step][joint], length T

  int n_steps() const { return static_cast<int>(actions.size()); }
};

struct TrajectoryDataset {
  double dt = 0.01;  // control dt
  int n_links = 0;
  std::uint64_t params_hash = 0;
  std::string provenance = "real-proxy";  // or "sim"
  std::vector<TrajectoryEpisode> episodes;
};

// Versioned binary file, magic "DLALIGN-TRAJ/1", little-endian f64 payload.
void save_dataset(const TrajectoryDataset& ds, const std::string& path);
TrajectoryDataset load_dataset(const std::string& path);

std::uint64_t hash_params(const DynamicsParams& params);

// Deterministic-mode rollouts of the policy in the gapped environment,
// recorded at control rate. Episodes start at phase 0 and cycle through
// the given motions.
TrajectoryDataset collect_rollouts(const GaussianPolicy& policy,
                                   const DynamicsParams& real_params,
                                   const std::vector<const ReferenceMotion*>& motions,
                                   int n_episodes, std::uint64_t seed,
                                   int control_substeps = 10);

// Residual action corrector pi^Delta(s, a) -> delta-a added to the action.
struct DeltaActionModel {
  GaussianPolicy policy;  // input [q, qd*scale, a], output n joints
  std::vector<std::uint8_t> joint_mask;  // 1 = active, 0 = forced zero
  double clamp = 0.25;  // rad, <= 0 disables

  std::vector<double> obs(const std::vector<double>& q,
                          const std::vector<double>& qd,
                          const std::vector<double>& action) const;
  // deterministic (mean-mode) output with mask and clamp applied
  std::vector<double> correction(const std::vector<double>& q,
                                 const std::vector<double>& qd,
                                 const std::vector<double>& action) const;
  std::vector<double> apply_mask_clamp(std::vector<double> raw) const;
};

void save_delta_model(const DeltaActionModel& model, const std::string& path);
DeltaActionModel load_delta_model(const std::string& path);

struct DeltaTrainConfig {
  double horizon_s = 1.0;
  double action_norm_weight = 0.2;  // w_norm * (exp(-||da||) - 1)
  double termination_threshold = 0.3;  // m, mean body-point distance
  std::vector<std::uint8_t> joint_mask;  // empty = all joints active
  double clamp = 0.25;
  double dataset_fraction = 1.0;  // leading fraction of episodes used
  // much sharper kernels than tracking: the residual errors being rewarded
  // are millimetre-scale
  KernelScales kernels{9e4, 9e4, 600.0, 1.5e4, 150.0};
  PpoConfig ppo;

  DeltaTrainConfig() {
    ppo.total_steps = 400'000;
    ppo.entropy_coef = 0.0;
    ppo.init_log_std = -3.5;
    ppo.lr_final = 1e-5;
    // the residual is nearly linear in [q, qd, a]; a small net extrapolates
    // better to states the dataset undersamples
    ppo.hidden_sizes = {32};
  }
};

// ASAP stage (b): PPO on episodes that replay recorded actions from recorded
// states in the nominal simulator, with the policy's delta added, rewarded
// for matching the recorded next states.
DeltaActionModel train_delta_action(const TrajectoryDataset& dataset,
                                    const DynamicsParams& sim_params,
                                    const DeltaTrainConfig& config,
                                    std::uint64_t seed,
                                    std::vector<UpdateLog>* curves = nullptr);

// ASAP stage (c) environment: f_sim(s, a + pi_delta(s, a)), delta frozen.
ActionHook make_delta_hook(const DeltaActionModel& model);

// Uniform action noise hook: a + beta * U[0,1) per dimension.
ActionHook make_noise_hook(double beta);

struct FinetuneConfig {
  PpoConfig ppo;
  double termination_threshold = 0.3;  // curriculum already at its final value
  StepHook step_hook;  // residual-augmented plant, empty = plain simulator
  FinetuneConfig() {
    ppo.total_steps = 300'000;
    ppo.init_log_std = -2.0;
    // gentler, annealed updates: fine-tuning polishes a working policy
    ppo.lr = 1e-4;
    ppo.lr_final = 1e-5;
    ppo.entropy_coef = 0.0;
  }
};

// PPO continued from the pretrained weights inside an action-hooked nominal
// environment (delta, noise, or none).
GaussianPolicy finetune_policy(const GaussianPolicy& pretrained,
                               const Mlp& pretrained_critic,
                               const DynamicsParams& sim_params,
                               const std::vector<const ReferenceMotion*>& motions,
                               const ActionHook& hook,
                               const FinetuneConfig& config, std::uint64_t seed,
                               std::vector<UpdateLog>* curves = nullptr);

// Learned additive state residual f_delta(s, a) -> [dq, dqd].
struct DeltaDynamicsModel {
  Mlp net;  // input [q, qd*scale, a], output 2n
  double output_scale = 0.01;

  std::vector<double> residual(const std::vector<double>& q,
                               const std::vector<double>& qd,
                               const std::vector<double>& action) const;
};

struct DeltaDynTrainConfig {
  int k_start = 1;
  int k_end = 10;
  int iterations = 4000;
  int batch_size = 64;
  double lr = 1e-3;
  std::vector<int> hidden_sizes = {64, 64};
  double dataset_fraction = 1.0;
};

struct DeltaDynResult {
  DeltaDynamicsModel model;
  double final_one_step_mse = 0.0;  // on the training set
};

// K-step autoregressive MSE against recorded states; gradients flow only
// through the residual net at each step (the simulator is not
// differentiated). K grows linearly from k_start to k_end over training.
DeltaDynResult train_delta_dynamics(const TrajectoryDataset& dataset,
                                    const DynamicsParams& sim_params,
                                    const DeltaDynTrainConfig& config,
                                    std::uint64_t seed,
                                    int control_substeps = 10);

// One control step of the residual-augmented simulator.
SimState step_with_residual(const SimState& state,
                            const std::vector<double>& action,
                            const DynamicsParams& params,
                            const DeltaDynamicsModel& model,
                            int control_substeps = 10);

struct SysIdGrid {
  std::vector<double> com_shift = {-0.02, 0.0, 0.02};
  std::vector<double> mass_ratio = {0.95, 1.0, 1.05};
  std::vector<double> kp_ratio = {0.95, 1.0, 1.05};
  std::vector<double> kd_ratio = {0.95, 1.0, 1.05};
};

struct SysIdGridPoint {
  double com_shift = 0.0;
  double mass_ratio = 1.0;
  double kp_ratio = 1.0;
  double kd_ratio = 1.0;
  double replay_error = 0.0;  // mean squared state deviation
};

struct SysIdResult {
  SysIdGridPoint best;
  std::vector<SysIdGridPoint> all;  // grid order
};

DynamicsParams sysid_point_params(const DynamicsParams& nominal,
                                  const SysIdGridPoint& point);

// Replays recorded actions under every grid point; argmin of mean squared
// state deviation, ties broken by distance to nominal then grid order.
SysIdResult sysid_grid_search(const TrajectoryDataset& dataset,
                              const DynamicsParams& sim_params,
                              const SysIdGrid& grid,
                              double replay_horizon_s = 1.0,
                              int control_substeps = 10);

struct CorrectionResult {
  std::vector<double> action;
  std::vector<double> residual_history;  // fixed point: ||y_{k+1} - y_k||
  double final_loss = 0.0;               // gradient method
  bool diverged = false;
};

// y_{k+1} = pi_hat(s) - pi_delta(s, y_k), y_0 = pi_hat(s).
CorrectionResult fixed_point_correct(const std::vector<double>& base_action,
                                     const DeltaActionModel& model,
                                     const std::vector<double>& q,
                                     const std::vector<double>& qd, int K);

// gradient descent on l(y) = ||y + pi_delta(s, y) - pi_hat(s)||^2
CorrectionResult gradient_correct(const std::vector<double>& base_action,
                                  const DeltaActionModel& model,
                                  const std::vector<double>& q,
                                  const std::vector<double>& qd, int steps,
                                  double lr);

// Per-joint mean |delta-a| over every (s, a) pair of the dataset.
std::vector<double> delta_magnitude_report(const DeltaActionModel& model,
                                           const TrajectoryDataset& dataset);

}  // namespace dlalign
