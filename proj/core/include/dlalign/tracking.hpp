#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dlalign/dynamics.hpp"
#include "dlalign/ppo.hpp"
#include "dlalign/reference.hpp"

namespace dlalign {

// Task weights are non-negative, penalty weights non-positive.
struct RewardWeights {
  double body_pos = 1.0;
  double end_effector_pos = 2.1;
  double body_vel = 0.5;
  double dof_pos = 0.75;
  double dof_vel = 0.5;
  double action_rate = -0.5;
  double torque = -1e-6;
  double dof_pos_limit = -10.0;
  double dof_vel_limit = -5.0;
  double torque_limit = -5.0;
  double termination = -200.0;

  void validate() const;
};

// Exponential kernel scales r = w * exp(-k * err^2)
struct KernelScales {
  double body_pos = 100.0;   // m^-2
  double end_effector = 100.0;
  double body_vel = 1.0;
  double dof_pos = 10.0;     // rad^-2
  double dof_vel = 0.1;
};

struct CurriculumConfig {
  double start_threshold = 1.5;  // m
  double end_threshold = 0.3;
  double progress_fraction = 0.6;  // fraction of total steps to anneal over

  double threshold_at(std::int64_t steps_done, std::int64_t total_steps) const;
};

struct DomainRandomizationConfig {
  bool enabled = false;
  double kp_scale_lo = 0.925;
  double kp_scale_hi = 1.05;
  double delay_lo_ms = 20.0;
  double delay_hi_ms = 40.0;
  double damping_scale_lo = 0.7;  // friction analog
  double damping_scale_hi = 1.3;
  double impulse_interval_s = 10.0;
  double impulse_magnitude = 0.5;  // rad/s
};

// Transforms the policy action before it reaches the plant (delta action
// injection, action noise). Identity when empty.
using ActionHook = std::function<std::vector<double>(
    const SimState&, const std::vector<double>&, Rng&)>;

// Replaces the entire control-rate plant step (residual-augmented dynamics).
// Receives the post-hook setpoint; must advance one control step.
using StepHook = std::function<SimState(const SimState&, const std::vector<double>&,
                                        const DynamicsParams&, int)>;

struct TrackingEnvOptions {
  bool rsi = true;                  // reference state initialization
  int fixed_motion = -1;            // -1: sample uniformly per episode
  bool terminate_on_error = true;   // curriculum threshold termination
  double termination_threshold = 0.3;  // m, overridden by curriculum hook
  int control_substeps = 10;        // physics steps per control step
  int history_len = 5;
  DomainRandomizationConfig dr;
  ActionHook action_hook;
  StepHook step_hook;
  double soft_dof_pos_limit = 2.8;   // rad
  double soft_dof_vel_limit = 20.0;  // rad/s
};

struct RewardBreakdown {
  double body_pos = 0.0, end_effector = 0.0, body_vel = 0.0;
  double dof_pos = 0.0, dof_vel = 0.0;
  double action_rate = 0.0, torque = 0.0;
  double dof_pos_limit = 0.0, dof_vel_limit = 0.0, torque_limit = 0.0;
  double termination = 0.0;
  double total() const;
};

// Phase-conditioned motion tracking task. Actor sees proprioceptive history
// plus phase; critic additionally sees reference body points, reference
// velocities at the current phase and the episode's dynamics parameters.
class TrackingEnv : public Env {
 public:
  TrackingEnv(DynamicsParams params, std::vector<const ReferenceMotion*> motions,
              RewardWeights weights = {}, KernelScales kernels = {},
              TrackingEnvOptions options = {});

  int actor_obs_dim() const override;
  int critic_obs_dim() const override;
  int action_dim() const override { return base_params_.n_links; }
  void reset(Rng& rng) override;
  void observe(std::vector<double>& actor_obs,
               std::vector<double>& critic_obs) const override;
  StepOutcome step(const std::vector<double>& action, Rng& rng) override;
  void set_termination_threshold(double t) override {
    options_.termination_threshold = t;
  }

  // introspection for evaluation and tests
  const SimState& sim_state() const { return state_; }
  double phase() const { return phase_; }
  const ReferenceMotion& current_motion() const { return *motion_; }
  const DynamicsParams& episode_params() const { return episode_params_; }
  const RewardBreakdown& last_reward() const { return last_reward_; }
  std::vector<Vec2> body_points() const;
  double last_mean_body_distance() const { return last_mean_dist_; }

  // force a specific reset phase (tests)
  void reset_at_phase(double phase, Rng& rng);

 private:
  void init_episode(double phase0, Rng& rng);
  void build_actor_obs(std::vector<double>& out) const;

  DynamicsParams base_params_;
  std::vector<const ReferenceMotion*> motions_;
  RewardWeights weights_;
  KernelScales kernels_;
  TrackingEnvOptions options_;

  const ReferenceMotion* motion_ = nullptr;
  DynamicsParams episode_params_;
  SimState state_;
  double phase_ = 0.0;
  double control_dt_ = 0.01;
  std::vector<std::vector<double>> q_hist_, qd_hist_, action_hist_;
  std::vector<double> prev_action_;
  std::vector<Vec2> prev_body_, prev_ref_body_;
  double next_impulse_t_ = 0.0;
  RewardBreakdown last_reward_;
  double last_mean_dist_ = 0.0;
};

}  // namespace dlalign
