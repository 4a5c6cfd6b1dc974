#include "dlalign/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dlalign {

namespace {
constexpr double kQdObsScale = 0.05;
}

void RewardWeights::validate() const {
  if (body_pos < 0 || end_effector_pos < 0 || body_vel < 0 || dof_pos < 0 ||
      dof_vel < 0)
    throw std::invalid_argument("task reward weights must be non-negative");
  if (action_rate > 0 || torque > 0 || dof_pos_limit > 0 ||
      dof_vel_limit > 0 || torque_limit > 0 || termination > 0)
    throw std::invalid_argument("penalty weights must be non-positive");
}

double CurriculumConfig::threshold_at(std::int64_t steps_done,
                                      std::int64_t total_steps) const {
  const double anneal_steps = progress_fraction * static_cast<double>(total_steps);
  if (anneal_steps <= 0.0) return end_threshold;
  const double x = std::min(1.0, static_cast<double>(steps_done) / anneal_steps);
  return start_threshold + x * (end_threshold - start_threshold);
}

double RewardBreakdown::total() const {
  return body_pos + end_effector + body_vel + dof_pos + dof_vel + action_rate +
         torque + dof_pos_limit + dof_vel_limit + torque_limit + termination;
}

TrackingEnv::TrackingEnv(DynamicsParams params,
                         std::vector<const ReferenceMotion*> motions,
                         RewardWeights weights, KernelScales kernels,
                         TrackingEnvOptions options)
    : base_params_(std::move(params)),
      motions_(std::move(motions)),
      weights_(weights),
      kernels_(kernels),
      options_(std::move(options)) {
  base_params_.validate();
  weights_.validate();
  if (motions_.empty())
    throw std::invalid_argument("TrackingEnv needs at least one motion");
  for (const auto* m : motions_)
    if (m->n_links() != base_params_.n_links)
      throw std::invalid_argument("motion dimension mismatch");
  control_dt_ = base_params_.dt * options_.control_substeps;
  episode_params_ = base_params_;
}

int TrackingEnv::actor_obs_dim() const {
  const int n = base_params_.n_links;
  return 3 * n * options_.history_len + 1;
}

int TrackingEnv::critic_obs_dim() const {
  const int n = base_params_.n_links;
  // + ref body points, ref qd, params summary (6n + 1)
  return actor_obs_dim() + 2 * body_point_count(n) + n + 6 * n + 1;
}

void TrackingEnv::reset(Rng& rng) {
  const double phase0 = options_.rsi ? rng.uniform() : 0.0;
  init_episode(phase0, rng);
}

void TrackingEnv::reset_at_phase(double phase, Rng& rng) {
  init_episode(phase, rng);
}

void TrackingEnv::init_episode(double phase0, Rng& rng) {
  const int idx = options_.fixed_motion >= 0
                      ? options_.fixed_motion
                      : static_cast<int>(rng.uniform_int(
                            0, static_cast<std::int64_t>(motions_.size()) - 1));
  motion_ = motions_[static_cast<size_t>(idx)];

  episode_params_ = base_params_;
  if (options_.dr.enabled) {
    const auto& dr = options_.dr;
    const double kp_scale = rng.uniform(dr.kp_scale_lo, dr.kp_scale_hi);
    const double delay_ms = rng.uniform(dr.delay_lo_ms, dr.delay_hi_ms);
    const double damping_scale =
        rng.uniform(dr.damping_scale_lo, dr.damping_scale_hi);
    for (int i = 0; i < episode_params_.n_links; ++i) {
      episode_params_.pd_kp[i] *= kp_scale;
      episode_params_.joint_damping[i] *= damping_scale;
    }
    episode_params_.control_delay_steps =
        static_cast<int>(std::round(delay_ms * 1e-3 / episode_params_.dt));
  }

  phase_ = phase0;
  const MotionFrame frame = frame_at_phase(*motion_, phase0);
  state_ = make_state(episode_params_, frame.q, frame.qd, frame.q);
  state_.t = phase0 * motion_->duration();

  q_hist_.assign(static_cast<size_t>(options_.history_len), frame.q);
  qd_hist_.assign(static_cast<size_t>(options_.history_len), frame.qd);
  action_hist_.assign(static_cast<size_t>(options_.history_len), frame.q);
  prev_action_ = frame.q;
  prev_body_ = forward_kinematics(frame.q, episode_params_);
  prev_ref_body_ = frame.body;
  next_impulse_t_ = state_.t + options_.dr.impulse_interval_s;
  last_reward_ = {};
  last_mean_dist_ = 0.0;
}

void TrackingEnv::build_actor_obs(std::vector<double>& out) const {
  const int n = base_params_.n_links;
  out.clear();
  out.reserve(static_cast<size_t>(actor_obs_dim()));
  for (const auto& q : q_hist_) out.insert(out.end(), q.begin(), q.end());
  for (const auto& qd : qd_hist_)
    for (double v : qd) out.push_back(v * kQdObsScale);
  for (const auto& a : action_hist_) out.insert(out.end(), a.begin(), a.end());
  out.push_back(phase_);
  (void)n;
}

void TrackingEnv::observe(std::vector<double>& actor_obs,
                          std::vector<double>& critic_obs) const {
  build_actor_obs(actor_obs);
  critic_obs = actor_obs;
  const MotionFrame frame = frame_at_phase(*motion_, std::min(phase_, 1.0));
  for (const Vec2& p : frame.body) {
    critic_obs.push_back(p.x);
    critic_obs.push_back(p.y);
  }
  for (double v : frame.qd) critic_obs.push_back(v * kQdObsScale);
  const auto& p = episode_params_;
  for (int i = 0; i < p.n_links; ++i) critic_obs.push_back(p.link_mass[i]);
  for (int i = 0; i < p.n_links; ++i) critic_obs.push_back(p.com_offset[i] * 10.0);
  for (int i = 0; i < p.n_links; ++i) critic_obs.push_back(p.pd_kp[i] * 0.01);
  for (int i = 0; i < p.n_links; ++i) critic_obs.push_back(p.pd_kd[i] * 0.1);
  for (int i = 0; i < p.n_links; ++i) critic_obs.push_back(p.motor_strength[i]);
  for (int i = 0; i < p.n_links; ++i) critic_obs.push_back(p.joint_damping[i]);
  critic_obs.push_back(p.control_delay_steps * 0.05);
}

std::vector<Vec2> TrackingEnv::body_points() const {
  return forward_kinematics(state_.q, episode_params_);
}

Env::StepOutcome TrackingEnv::step(const std::vector<double>& action,
                                   Rng& rng) {
  const int n = base_params_.n_links;
  if (static_cast<int>(action.size()) != n)
    throw std::invalid_argument("action dimension mismatch");

  std::vector<double> setpoint =
      options_.action_hook ? options_.action_hook(state_, action, rng) : action;

  double torque_sq = 0.0, torque_overshoot = 0.0;
  if (options_.step_hook) {
    const std::vector<double> tau = applied_torques(state_, setpoint, episode_params_);
    for (int i = 0; i < n; ++i) {
      torque_sq += tau[i] * tau[i];
      const double rel = std::abs(tau[i]) /
                         std::max(1e-9, episode_params_.torque_limit[i]);
      const double over = std::max(0.0, rel - 0.95);
      torque_overshoot += over * over;
    }
    state_ = options_.step_hook(state_, setpoint, episode_params_,
                                options_.control_substeps);
  } else
  for (int s = 0; s < options_.control_substeps; ++s) {
    if (options_.dr.enabled && state_.t >= next_impulse_t_) {
      for (int i = 0; i < n; ++i)
        state_.qd[i] += rng.uniform(-options_.dr.impulse_magnitude,
                                    options_.dr.impulse_magnitude);
      next_impulse_t_ += options_.dr.impulse_interval_s;
    }
    // effective setpoint after the delay line, for the torque penalty
    const std::vector<double>& eff =
        episode_params_.control_delay_steps > 0 && !state_.delay_buffer.empty()
            ? state_.delay_buffer.front()
            : setpoint;
    const std::vector<double> tau = applied_torques(state_, eff, episode_params_);
    for (int i = 0; i < n; ++i) {
      torque_sq += tau[i] * tau[i];
      const double rel = std::abs(tau[i]) /
                         std::max(1e-9, episode_params_.torque_limit[i]);
      const double over = std::max(0.0, rel - 0.95);
      torque_overshoot += over * over;
    }
    state_ = dlalign::step(state_, Action{setpoint}, episode_params_);
  }
  torque_sq /= options_.control_substeps;
  torque_overshoot /= options_.control_substeps;

  const double prev_phase = phase_;
  phase_ = std::min(1.0, phase_ + control_dt_ / motion_->duration());
  const bool completed = prev_phase + control_dt_ / motion_->duration() >= 1.0;

  const MotionFrame ref = frame_at_phase(*motion_, phase_);
  const std::vector<Vec2> body = forward_kinematics(state_.q, episode_params_);

  // tracking errors
  double body_err2 = 0.0, body_vel_err2 = 0.0, mean_dist = 0.0;
  for (size_t j = 0; j < body.size(); ++j) {
    const Vec2 d = body[j] - ref.body[j];
    body_err2 += d.x * d.x + d.y * d.y;
    mean_dist += std::sqrt(d.x * d.x + d.y * d.y);
    const Vec2 v_sim = (1.0 / control_dt_) * (body[j] - prev_body_[j]);
    const Vec2 v_ref = (1.0 / control_dt_) * (ref.body[j] - prev_ref_body_[j]);
    const Vec2 dv = v_sim - v_ref;
    body_vel_err2 += dv.x * dv.x + dv.y * dv.y;
  }
  const double n_pts = static_cast<double>(body.size());
  body_err2 /= n_pts;
  body_vel_err2 /= n_pts;
  mean_dist /= n_pts;
  last_mean_dist_ = mean_dist;

  const Vec2 ee_d = body.back() - ref.body.back();
  const double ee_err2 = ee_d.x * ee_d.x + ee_d.y * ee_d.y;

  double dof_err2 = 0.0, dof_vel_err2 = 0.0;
  double pos_overshoot = 0.0, vel_overshoot = 0.0, action_rate = 0.0;
  for (int i = 0; i < n; ++i) {
    const double dq = state_.q[i] - ref.q[i];
    const double dqd = state_.qd[i] - ref.qd[i];
    dof_err2 += dq * dq;
    dof_vel_err2 += dqd * dqd;
    const double po = std::max(0.0, std::abs(state_.q[i]) - options_.soft_dof_pos_limit);
    pos_overshoot += po * po;
    const double vo = std::max(0.0, std::abs(state_.qd[i]) - options_.soft_dof_vel_limit);
    vel_overshoot += vo * vo;
    const double da = action[i] - prev_action_[i];
    action_rate += da * da;
  }
  dof_err2 /= n;
  dof_vel_err2 /= n;

  RewardBreakdown r;
  r.body_pos = weights_.body_pos * std::exp(-kernels_.body_pos * body_err2);
  r.end_effector =
      weights_.end_effector_pos * std::exp(-kernels_.end_effector * ee_err2);
  r.body_vel = weights_.body_vel * std::exp(-kernels_.body_vel * body_vel_err2);
  r.dof_pos = weights_.dof_pos * std::exp(-kernels_.dof_pos * dof_err2);
  r.dof_vel = weights_.dof_vel * std::exp(-kernels_.dof_vel * dof_vel_err2);
  r.action_rate = weights_.action_rate * action_rate;
  r.torque = weights_.torque * torque_sq;
  r.dof_pos_limit = weights_.dof_pos_limit * pos_overshoot;
  r.dof_vel_limit = weights_.dof_vel_limit * vel_overshoot;
  r.torque_limit = weights_.torque_limit * torque_overshoot;

  StepOutcome out;
  const bool failed = options_.terminate_on_error &&
                      mean_dist > options_.termination_threshold && !completed;
  if (failed) {
    r.termination = weights_.termination;
    out.done = true;
    out.time_limit = false;
  } else if (completed) {
    out.done = true;
    out.time_limit = true;  // motion finished: bootstrap the terminal value
  }
  last_reward_ = r;
  out.reward = r.total();

  // histories shift: newest last
  q_hist_.erase(q_hist_.begin());
  q_hist_.push_back(state_.q);
  qd_hist_.erase(qd_hist_.begin());
  qd_hist_.push_back(state_.qd);
  action_hist_.erase(action_hist_.begin());
  action_hist_.push_back(action);
  prev_action_ = action;
  prev_body_ = body;
  prev_ref_body_ = ref.body;
  return out;
}

}  // namespace dlalign
