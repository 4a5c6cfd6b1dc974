#include "dlalign/align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dlalign/binio.hpp"

namespace dlalign {

namespace {

constexpr char kTrajMagic[] = "DLALIGN-TRAJ/1\n";
constexpr char kDeltaMagic[] = "DLALIGN-DELTA/1\n";
constexpr double kQdObsScale = 0.05;

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a_f64s(std::uint64_t h, const std::vector<double>& v) {
  return fnv1a(h, v.data(), v.size() * sizeof(double));
}

// One control step of the plain simulator with a fixed setpoint.
SimState control_step(const SimState& state, const std::vector<double>& action,
                      const DynamicsParams& params, int substeps) {
  SimState s = state;
  const Action a{action};
  for (int i = 0; i < substeps; ++i) s = step(s, a, params);
  return s;
}

int usable_episodes(const TrajectoryDataset& ds, double fraction) {
  const int n = static_cast<int>(ds.episodes.size());
  return std::clamp(static_cast<int>(std::round(fraction * n)), 1, n);
}

}  // namespace

std::uint64_t hash_params(const DynamicsParams& p) {
  std::uint64_t h = 14695981039346656037ULL;
  const std::int64_t n = p.n_links;
  h = fnv1a(h, &n, sizeof(n));
  h = fnv1a_f64s(h, p.link_mass);
  h = fnv1a_f64s(h, p.link_length);
  h = fnv1a_f64s(h, p.com_offset);
  h = fnv1a_f64s(h, p.joint_damping);
  h = fnv1a(h, &p.gravity, sizeof(double));
  h = fnv1a_f64s(h, p.pd_kp);
  h = fnv1a_f64s(h, p.pd_kd);
  h = fnv1a_f64s(h, p.torque_limit);
  h = fnv1a_f64s(h, p.motor_strength);
  const std::int64_t d = p.control_delay_steps;
  h = fnv1a(h, &d, sizeof(d));
  h = fnv1a(h, &p.dt, sizeof(double));
  return h;
}

void save_dataset(const TrajectoryDataset& ds, const std::string& path) {
  BinWriter w(path);
  w.magic(kTrajMagic);
  w.f64(ds.dt);
  w.u32(static_cast<std::uint32_t>(ds.n_links));
  w.u64(ds.params_hash);
  w.str(ds.provenance);
  w.u32(static_cast<std::uint32_t>(ds.episodes.size()));
  for (const auto& ep : ds.episodes) {
    w.str(ep.motion_name);
    w.u8(ep.diverged ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(ep.n_steps()));
    for (const auto& q : ep.q) w.f64s(q);
    for (const auto& qd : ep.qd) w.f64s(qd);
    for (const auto& a : ep.actions) w.f64s(a);
  }
  w.close();
}

TrajectoryDataset load_dataset(const std::string& path) {
  BinReader r(path);
  r.magic(kTrajMagic);
  TrajectoryDataset ds;
  ds.dt = r.f64();
  ds.n_links = static_cast<int>(r.u32());
  ds.params_hash = r.u64();
  ds.provenance = r.str();
  const auto n_eps = r.u32();
  ds.episodes.resize(n_eps);
  for (auto& ep : ds.episodes) {
    ep.motion_name = r.str();
    ep.diverged = r.u8() != 0;
    const int T = static_cast<int>(r.u32());
    ep.q.resize(T + 1);
    ep.qd.resize(T + 1);
    ep.actions.resize(T);
    for (auto& q : ep.q) q = r.f64s(ds.n_links);
    for (auto& qd : ep.qd) qd = r.f64s(ds.n_links);
    for (auto& a : ep.actions) a = r.f64s(ds.n_links);
  }
  return ds;
}

TrajectoryDataset collect_rollouts(
    const GaussianPolicy& policy, const DynamicsParams& real_params,
    const std::vector<const ReferenceMotion*>& motions, int n_episodes,
    std::uint64_t seed, int control_substeps) {
  TrajectoryDataset ds;
  ds.dt = real_params.dt * control_substeps;
  ds.n_links = real_params.n_links;
  ds.params_hash = hash_params(real_params);
  ds.provenance = "real-proxy";

  Rng master = make_rng(seed);
  for (int e = 0; e < n_episodes; ++e) {
    TrackingEnvOptions opt;
    opt.rsi = false;
    opt.terminate_on_error = true;
    opt.termination_threshold = 0.5;
    opt.control_substeps = control_substeps;
    opt.fixed_motion = e % static_cast<int>(motions.size());
    TrackingEnv env(real_params, motions, {}, {}, opt);
    Rng rng = master.split(static_cast<std::uint64_t>(e));
    env.reset(rng);

    TrajectoryEpisode ep;
    ep.motion_name = env.current_motion().name;
    ep.q.push_back(env.sim_state().q);
    ep.qd.push_back(env.sim_state().qd);
    std::vector<double> aobs, cobs;
    while (true) {
      env.observe(aobs, cobs);
      const std::vector<double> action = policy.mean(aobs);
      const Env::StepOutcome out = env.step(action, rng);
      ep.actions.push_back(action);
      ep.q.push_back(env.sim_state().q);
      ep.qd.push_back(env.sim_state().qd);
      if (out.done) {
        ep.diverged = !out.time_limit;
        break;
      }
    }
    ds.episodes.push_back(std::move(ep));
  }
  return ds;
}

std::vector<double> DeltaActionModel::obs(const std::vector<double>& q,
                                          const std::vector<double>& qd,
                                          const std::vector<double>& action) const {
  std::vector<double> o;
  o.reserve(q.size() * 3);
  o.insert(o.end(), q.begin(), q.end());
  for (double v : qd) o.push_back(v * kQdObsScale);
  o.insert(o.end(), action.begin(), action.end());
  return o;
}

std::vector<double> DeltaActionModel::apply_mask_clamp(std::vector<double> raw) const {
  for (size_t i = 0; i < raw.size(); ++i) {
    if (!joint_mask.empty() && joint_mask[i] == 0) {
      raw[i] = 0.0;
    } else if (clamp > 0.0) {
      raw[i] = std::clamp(raw[i], -clamp, clamp);
    }
  }
  return raw;
}

std::vector<double> DeltaActionModel::correction(
    const std::vector<double>& q, const std::vector<double>& qd,
    const std::vector<double>& action) const {
  return apply_mask_clamp(policy.mean(obs(q, qd, action)));
}

void save_delta_model(const DeltaActionModel& model, const std::string& path) {
  save_checkpoint(model.policy, path + ".ckpt");
  BinWriter w(path);
  w.magic(kDeltaMagic);
  w.f64(model.clamp);
  w.u32(static_cast<std::uint32_t>(model.joint_mask.size()));
  for (auto m : model.joint_mask) w.u8(m);
  w.close();
}

DeltaActionModel load_delta_model(const std::string& path) {
  DeltaActionModel model;
  model.policy = load_checkpoint(path + ".ckpt");
  BinReader r(path);
  r.magic(kDeltaMagic);
  model.clamp = r.f64();
  const auto n = r.u32();
  model.joint_mask.resize(n);
  for (auto& m : model.joint_mask) m = r.u8();
  return model;
}

namespace {

// PPO episode: replay a recorded action window from the recorded start state
// in the nominal simulator, with the policy's delta added; reward matches
// the simulated state to the recorded one.
class DeltaActionEnv : public Env {
 public:
  DeltaActionEnv(const TrajectoryDataset& dataset, DynamicsParams sim_params,
                 const DeltaTrainConfig& config)
      : dataset_(dataset),
        params_(std::move(sim_params)),
        config_(config),
        n_(params_.n_links) {
    substeps_ = static_cast<int>(std::round(dataset.dt / params_.dt));
    horizon_steps_ = std::max(1, static_cast<int>(std::round(
                                     config.horizon_s / dataset.dt)));
    n_episodes_ = usable_episodes(dataset, config.dataset_fraction);
    bool any = false;
    for (int e = 0; e < n_episodes_; ++e)
      if (dataset.episodes[e].n_steps() >= horizon_steps_) any = true;
    if (!any)
      throw std::invalid_argument(
          "delta training horizon exceeds every dataset episode");
  }

  int actor_obs_dim() const override { return 3 * n_; }
  int critic_obs_dim() const override { return 3 * n_ + 2 * n_ + 1; }
  int action_dim() const override { return n_; }

  void reset(Rng& rng) override {
    do {
      ep_ = static_cast<int>(rng.uniform_int(0, n_episodes_ - 1));
    } while (dataset_.episodes[ep_].n_steps() < horizon_steps_);
    const auto& ep = dataset_.episodes[ep_];
    t0_ = static_cast<int>(rng.uniform_int(0, ep.n_steps() - horizon_steps_));
    t_ = t0_;
    state_ = make_state(params_, ep.q[t_], ep.qd[t_], ep.actions[t_]);
    prev_delta_.assign(n_, 0.0);
    prev_body_ = forward_kinematics(ep.q[t_], params_);
    prev_real_body_ = prev_body_;
  }

  void observe(std::vector<double>& actor_obs,
               std::vector<double>& critic_obs) const override {
    const auto& ep = dataset_.episodes[ep_];
    // the bootstrap observation after a time-limit done can sit one past the
    // last recorded action; clamp so it stays in range
    const int t = std::min(t_, ep.n_steps() - 1);
    actor_obs.clear();
    actor_obs.insert(actor_obs.end(), state_.q.begin(), state_.q.end());
    for (double v : state_.qd) actor_obs.push_back(v * kQdObsScale);
    actor_obs.insert(actor_obs.end(), ep.actions[t].begin(),
                     ep.actions[t].end());
    critic_obs = actor_obs;
    // privileged: the recorded next state and window progress
    critic_obs.insert(critic_obs.end(), ep.q[t + 1].begin(), ep.q[t + 1].end());
    for (double v : ep.qd[t + 1]) critic_obs.push_back(v * kQdObsScale);
    critic_obs.push_back(static_cast<double>(t - t0_) / horizon_steps_);
  }

  StepOutcome step(const std::vector<double>& raw_delta, Rng&) override {
    const auto& ep = dataset_.episodes[ep_];
    DeltaActionModel shim;
    shim.joint_mask = config_.joint_mask;
    shim.clamp = config_.clamp;
    const std::vector<double> delta = shim.apply_mask_clamp(raw_delta);

    std::vector<double> applied = ep.actions[t_];
    for (int i = 0; i < n_; ++i) applied[i] += delta[i];
    state_ = control_step(state_, applied, params_, substeps_);
    ++t_;

    const std::vector<Vec2> body = forward_kinematics(state_.q, params_);
    const std::vector<Vec2> real_body = forward_kinematics(ep.q[t_], params_);

    double body_err2 = 0.0, body_vel_err2 = 0.0, mean_dist = 0.0;
    for (size_t j = 0; j < body.size(); ++j) {
      const Vec2 d = body[j] - real_body[j];
      body_err2 += d.x * d.x + d.y * d.y;
      mean_dist += std::sqrt(d.x * d.x + d.y * d.y);
      const Vec2 dv = (1.0 / dataset_.dt) *
                      ((body[j] - prev_body_[j]) - (real_body[j] - prev_real_body_[j]));
      body_vel_err2 += dv.x * dv.x + dv.y * dv.y;
    }
    const double n_pts = static_cast<double>(body.size());
    body_err2 /= n_pts;
    body_vel_err2 /= n_pts;
    mean_dist /= n_pts;
    const Vec2 ee_d = body.back() - real_body.back();

    double dof_err2 = 0.0, dof_vel_err2 = 0.0, delta_norm2 = 0.0, rate = 0.0;
    for (int i = 0; i < n_; ++i) {
      const double dq = state_.q[i] - ep.q[t_][i];
      const double dqd = state_.qd[i] - ep.qd[t_][i];
      dof_err2 += dq * dq;
      dof_vel_err2 += dqd * dqd;
      delta_norm2 += delta[i] * delta[i];
      const double dr = delta[i] - prev_delta_[i];
      rate += dr * dr;
    }
    dof_err2 /= n_;
    dof_vel_err2 /= n_;

    const auto& k = config_.kernels;
    double reward = 0.0;
    reward += 1.0 * std::exp(-k.body_pos * body_err2);
    reward += 1.0 * std::exp(-k.end_effector * (ee_d.x * ee_d.x + ee_d.y * ee_d.y));
    reward += 0.5 * std::exp(-k.body_vel * body_vel_err2);
    reward += 0.5 * std::exp(-k.dof_pos * dof_err2);
    reward += 0.5 * std::exp(-k.dof_vel * dof_vel_err2);
    reward += -0.01 * rate;
    reward += config_.action_norm_weight * (std::exp(-std::sqrt(delta_norm2)) - 1.0);

    StepOutcome out;
    if (mean_dist > config_.termination_threshold) {
      reward += -200.0;
      out.done = true;
    } else if (t_ - t0_ >= horizon_steps_ ||
               t_ >= ep.n_steps()) {
      out.done = true;
      out.time_limit = true;
    }
    out.reward = reward;

    prev_delta_ = delta;
    prev_body_ = body;
    prev_real_body_ = real_body;
    return out;
  }

 private:
  const TrajectoryDataset& dataset_;
  DynamicsParams params_;
  DeltaTrainConfig config_;
  int n_ = 0;
  int substeps_ = 10;
  int horizon_steps_ = 0;
  int n_episodes_ = 0;

  int ep_ = 0;
  int t0_ = 0;
  int t_ = 0;
  SimState state_;
  std::vector<double> prev_delta_;
  std::vector<Vec2> prev_body_, prev_real_body_;
};

}  // namespace

DeltaActionModel train_delta_action(const TrajectoryDataset& dataset,
                                    const DynamicsParams& sim_params,
                                    const DeltaTrainConfig& config,
                                    std::uint64_t seed,
                                    std::vector<UpdateLog>* curves) {
  if (dataset.episodes.empty())
    throw std::invalid_argument("empty trajectory dataset");
  if (!config.joint_mask.empty() &&
      static_cast<int>(config.joint_mask.size()) != sim_params.n_links)
    throw std::invalid_argument("joint mask dimension mismatch");

  const EnvFactory factory = [&](int) {
    return std::make_unique<DeltaActionEnv>(dataset, sim_params, config);
  };

  // replay windows for checkpoint selection: PPO on this objective has
  // occasional bad runs, so keep the snapshot that replays best
  const int substeps =
      static_cast<int>(std::round(dataset.dt / sim_params.dt));
  const int horizon_steps = std::max(
      1, static_cast<int>(std::round(config.horizon_s / dataset.dt)));
  const int n_eps = usable_episodes(dataset, config.dataset_fraction);
  std::vector<std::pair<int, int>> windows;
  for (int e = 0; e < n_eps && windows.size() < 48; ++e) {
    const auto& ep = dataset.episodes[e];
    for (int t0 = 0; t0 + horizon_steps <= ep.n_steps() && windows.size() < 48;
         t0 += horizon_steps)
      windows.emplace_back(e, t0);
  }
  const auto replay_score = [&](const DeltaActionModel& cand) {
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto& [e, t0] : windows) {
      const auto& ep = dataset.episodes[e];
      SimState s = make_state(sim_params, ep.q[t0], ep.qd[t0], ep.actions[t0]);
      for (int k = 0; k < horizon_steps; ++k) {
        std::vector<double> a = ep.actions[t0 + k];
        const std::vector<double> d = cand.correction(s.q, s.qd, a);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += d[i];
        s = control_step(s, a, sim_params, substeps);
        const std::vector<Vec2> body = forward_kinematics(s.q, sim_params);
        const std::vector<Vec2> real =
            forward_kinematics(ep.q[t0 + k + 1], sim_params);
        for (std::size_t j = 0; j < body.size(); ++j) {
          const Vec2 dv = body[j] - real[j];
          acc += std::sqrt(dv.x * dv.x + dv.y * dv.y);
          ++count;
        }
      }
    }
    return count > 0 ? acc / count : 0.0;
  };

  DeltaActionModel model;
  model.joint_mask = config.joint_mask;
  model.clamp = config.clamp;

  // start from the identity correction: a randomly initialised residual is
  // already a dynamics perturbation and PPO sometimes fails to climb back
  // out of it, so zero the mean net's output layer
  MlpSpec pspec;
  pspec.layer_sizes.push_back(3 * sim_params.n_links);
  for (int h : config.ppo.hidden_sizes) pspec.layer_sizes.push_back(h);
  pspec.layer_sizes.push_back(sim_params.n_links);
  pspec.activation = config.ppo.activation;
  Rng init_rng(seed ^ 0x5eedu);
  GaussianPolicy init_policy =
      GaussianPolicy::create(pspec, init_rng, config.ppo.init_log_std);
  {
    const auto& sizes = pspec.layer_sizes;
    const std::size_t last =
        static_cast<std::size_t>(sizes[sizes.size() - 2] + 1) * sizes.back();
    std::fill(init_policy.mean_net.params.end() - last,
              init_policy.mean_net.params.end(), 0.0);
  }

  double best = std::numeric_limits<double>::infinity();
  TrainOptions topt;
  topt.init_policy = &init_policy;
  topt.snapshot_every = 25;
  topt.on_snapshot = [&](const GaussianPolicy& p, const Mlp&) {
    DeltaActionModel cand = model;
    cand.policy = p;
    const double score = replay_score(cand);
    if (score < best) {
      best = score;
      model.policy = p;
    }
  };
  const TrainResult result = train(factory, config.ppo, seed, topt);
  if (curves != nullptr) *curves = result.curves;

  DeltaActionModel last = model;
  last.policy = result.policy;
  if (replay_score(last) < best || !std::isfinite(best))
    model.policy = result.policy;
  return model;
}

ActionHook make_delta_hook(const DeltaActionModel& model) {
  // the model is copied into the hook; fine-tuning cannot mutate it
  return [model](const SimState& s, const std::vector<double>& a, Rng&) {
    const std::vector<double> delta = model.correction(s.q, s.qd, a);
    std::vector<double> out = a;
    for (size_t i = 0; i < out.size(); ++i) out[i] += delta[i];
    return out;
  };
}

ActionHook make_noise_hook(double beta) {
  if (beta < 0.0) throw std::invalid_argument("beta must be >= 0");
  return [beta](const SimState&, const std::vector<double>& a, Rng& rng) {
    std::vector<double> out = a;
    for (double& v : out) v += beta * rng.uniform();
    return out;
  };
}

GaussianPolicy finetune_policy(const GaussianPolicy& pretrained,
                               const Mlp& pretrained_critic,
                               const DynamicsParams& sim_params,
                               const std::vector<const ReferenceMotion*>& motions,
                               const ActionHook& hook,
                               const FinetuneConfig& config, std::uint64_t seed,
                               std::vector<UpdateLog>* curves) {
  TrackingEnvOptions opt;
  opt.rsi = true;
  opt.terminate_on_error = true;
  opt.termination_threshold = config.termination_threshold;
  opt.action_hook = hook;
  opt.step_hook = config.step_hook;
  const EnvFactory factory = [&](int) {
    return std::make_unique<TrackingEnv>(sim_params, motions, RewardWeights{},
                                         KernelScales{}, opt);
  };
  GaussianPolicy init = pretrained;
  // fine-tuning restarts exploration from a tighter distribution
  for (auto& ls : init.log_std) ls = std::min(ls, config.ppo.init_log_std);
  TrainOptions topt;
  topt.init_policy = &init;
  topt.init_critic = &pretrained_critic;
  const TrainResult result = train(factory, config.ppo, seed, topt);
  if (curves != nullptr) *curves = result.curves;
  return result.policy;
}

std::vector<double> DeltaDynamicsModel::residual(
    const std::vector<double>& q, const std::vector<double>& qd,
    const std::vector<double>& action) const {
  std::vector<double> in;
  in.reserve(q.size() * 3);
  in.insert(in.end(), q.begin(), q.end());
  for (double v : qd) in.push_back(v * kQdObsScale);
  in.insert(in.end(), action.begin(), action.end());
  std::vector<double> out = net.forward(in);
  const size_t n = q.size();
  for (size_t i = 0; i < n; ++i) out[i] *= output_scale;
  for (size_t i = n; i < 2 * n; ++i) out[i] *= 10.0 * output_scale;
  return out;
}

SimState step_with_residual(const SimState& state,
                            const std::vector<double>& action,
                            const DynamicsParams& params,
                            const DeltaDynamicsModel& model,
                            int control_substeps) {
  SimState next = control_step(state, action, params, control_substeps);
  const std::vector<double> res = model.residual(state.q, state.qd, action);
  const int n = params.n_links;
  for (int i = 0; i < n; ++i) {
    next.q[i] += res[i];
    next.qd[i] += res[n + i];
  }
  return next;
}

DeltaDynResult train_delta_dynamics(const TrajectoryDataset& dataset,
                                    const DynamicsParams& sim_params,
                                    const DeltaDynTrainConfig& config,
                                    std::uint64_t seed, int control_substeps) {
  if (dataset.episodes.empty())
    throw std::invalid_argument("empty trajectory dataset");
  const int n = sim_params.n_links;
  Rng rng = make_rng(seed);

  MlpSpec spec;
  spec.layer_sizes.push_back(3 * n);
  for (int h : config.hidden_sizes) spec.layer_sizes.push_back(h);
  spec.layer_sizes.push_back(2 * n);
  spec.activation = Activation::kTanh;

  DeltaDynamicsModel model;
  model.net = Mlp::create(spec, rng);

  AdamState opt = AdamState::zeros(model.net.params.size());
  std::vector<double> grad(model.net.params.size());
  const int n_episodes = usable_episodes(dataset, config.dataset_fraction);

  for (int it = 0; it < config.iterations; ++it) {
    const double progress = static_cast<double>(it) / std::max(1, config.iterations - 1);
    const int K = config.k_start +
                  static_cast<int>(std::round(progress * (config.k_end - config.k_start)));
    std::fill(grad.begin(), grad.end(), 0.0);
    int n_terms = 0;
    for (int b = 0; b < config.batch_size; ++b) {
      const auto& ep = dataset.episodes[static_cast<size_t>(
          rng.uniform_int(0, n_episodes - 1))];
      if (ep.n_steps() < K + 1) continue;
      const int t0 = static_cast<int>(rng.uniform_int(0, ep.n_steps() - K - 1));
      SimState s = make_state(sim_params, ep.q[t0], ep.qd[t0], ep.actions[t0]);
      for (int i = 0; i < K; ++i) {
        const int t = t0 + i;
        std::vector<double> in;
        in.insert(in.end(), s.q.begin(), s.q.end());
        for (double v : s.qd) in.push_back(v * kQdObsScale);
        in.insert(in.end(), ep.actions[t].begin(), ep.actions[t].end());
        MlpCache cache;
        const std::vector<double> raw = forward_cached(model.net, in, cache);

        SimState next = control_step(s, ep.actions[t], sim_params, control_substeps);
        std::vector<double> out_grad(2 * static_cast<size_t>(n));
        for (int j = 0; j < n; ++j) {
          next.q[j] += raw[j] * model.output_scale;
          next.qd[j] += raw[n + j] * 10.0 * model.output_scale;
          const double eq = next.q[j] - ep.q[t + 1][j];
          const double eqd = next.qd[j] - ep.qd[t + 1][j];
          // gradients flow through the residual only
          out_grad[j] = 2.0 * eq * model.output_scale;
          out_grad[n + j] = 2.0 * eqd * 10.0 * model.output_scale;
        }
        std::vector<double> in_grad;
        backward(model.net, cache, out_grad, grad, in_grad);
        ++n_terms;
        s = next;
      }
    }
    if (n_terms > 0) {
      for (double& g : grad) g /= n_terms;
      adam_step(model.net.params, grad, opt, config.lr);
    }
  }

  // K = 1 training-set fit
  double mse = 0.0;
  std::int64_t count = 0;
  for (int e = 0; e < n_episodes; ++e) {
    const auto& ep = dataset.episodes[e];
    for (int t = 0; t < ep.n_steps(); ++t) {
      SimState s = make_state(sim_params, ep.q[t], ep.qd[t], ep.actions[t]);
      SimState next = step_with_residual(s, ep.actions[t], sim_params, model,
                                         control_substeps);
      for (int j = 0; j < n; ++j) {
        const double eq = next.q[j] - ep.q[t + 1][j];
        const double eqd = next.qd[j] - ep.qd[t + 1][j];
        mse += eq * eq + eqd * eqd;
      }
      count += 2 * n;
    }
  }
  return {std::move(model), count > 0 ? mse / static_cast<double>(count) : 0.0};
}

DynamicsParams sysid_point_params(const DynamicsParams& nominal,
                                  const SysIdGridPoint& point) {
  GapSpec gap = GapSpec::identity(nominal.n_links);
  gap.mass_ratio = point.mass_ratio;
  gap.com_shift = point.com_shift;
  std::fill(gap.kp_ratio.begin(), gap.kp_ratio.end(), point.kp_ratio);
  std::fill(gap.kd_ratio.begin(), gap.kd_ratio.end(), point.kd_ratio);
  return apply_gap(nominal, gap);
}

SysIdResult sysid_grid_search(const TrajectoryDataset& dataset,
                              const DynamicsParams& sim_params,
                              const SysIdGrid& grid, double replay_horizon_s,
                              int control_substeps) {
  if (grid.com_shift.empty() || grid.mass_ratio.empty() ||
      grid.kp_ratio.empty() || grid.kd_ratio.empty())
    throw std::invalid_argument("empty SysID grid");
  const int n = sim_params.n_links;
  const int horizon = std::max(
      1, static_cast<int>(std::round(replay_horizon_s / dataset.dt)));

  SysIdResult result;
  for (double c : grid.com_shift)
    for (double km : grid.mass_ratio)
      for (double kp : grid.kp_ratio)
        for (double kd : grid.kd_ratio) {
          SysIdGridPoint pt{c, km, kp, kd, 0.0};
          const DynamicsParams params = sysid_point_params(sim_params, pt);
          double err = 0.0;
          std::int64_t count = 0;
          for (const auto& ep : dataset.episodes) {
            const int T = std::min(horizon, ep.n_steps());
            SimState s = make_state(params, ep.q[0], ep.qd[0], ep.actions[0]);
            for (int t = 0; t < T; ++t) {
              s = control_step(s, ep.actions[t], params, control_substeps);
              for (int j = 0; j < n; ++j) {
                const double eq = s.q[j] - ep.q[t + 1][j];
                const double eqd = s.qd[j] - ep.qd[t + 1][j];
                err += eq * eq + eqd * eqd;
              }
              count += 2 * n;
            }
          }
          pt.replay_error = count > 0 ? err / static_cast<double>(count) : 0.0;
          result.all.push_back(pt);
        }

  auto nominal_distance = [](const SysIdGridPoint& p) {
    const double dc = p.com_shift / 0.02;
    const double dm = (p.mass_ratio - 1.0) / 0.05;
    const double dp = (p.kp_ratio - 1.0) / 0.05;
    const double dd = (p.kd_ratio - 1.0) / 0.05;
    return dc * dc + dm * dm + dp * dp + dd * dd;
  };
  size_t best = 0;
  for (size_t i = 1; i < result.all.size(); ++i) {
    const auto& a = result.all[i];
    const auto& b = result.all[best];
    if (a.replay_error < b.replay_error ||
        (a.replay_error == b.replay_error &&
         nominal_distance(a) < nominal_distance(b)))
      best = i;
  }
  result.best = result.all[best];
  return result;
}

CorrectionResult fixed_point_correct(const std::vector<double>& base_action,
                                     const DeltaActionModel& model,
                                     const std::vector<double>& q,
                                     const std::vector<double>& qd, int K) {
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  CorrectionResult result;
  std::vector<double> y = base_action;
  std::vector<double> best = y;
  double best_residual = std::numeric_limits<double>::infinity();
  int growing = 0;
  double prev_residual = -1.0;
  for (int k = 0; k < K; ++k) {
    const std::vector<double> delta = model.correction(q, qd, y);
    std::vector<double> y_next(y.size());
    double res = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
      y_next[i] = base_action[i] - delta[i];
      const double d = y_next[i] - y[i];
      res += d * d;
    }
    res = std::sqrt(res);
    result.residual_history.push_back(res);
    y = std::move(y_next);
    if (res < best_residual) {
      best_residual = res;
      best = y;
    }
    if (prev_residual >= 0.0 && res > prev_residual)
      ++growing;
    else
      growing = 0;
    prev_residual = res;
    if (growing >= 3) {
      result.diverged = true;
      result.action = best;
      return result;
    }
  }
  result.action = y;
  return result;
}

CorrectionResult gradient_correct(const std::vector<double>& base_action,
                                  const DeltaActionModel& model,
                                  const std::vector<double>& q,
                                  const std::vector<double>& qd, int steps,
                                  double lr) {
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  const size_t n = base_action.size();
  CorrectionResult result;
  std::vector<double> y = base_action;
  std::vector<double> pgrad(model.policy.mean_net.params.size());
  for (int s = 0; s < steps; ++s) {
    const std::vector<double> in = model.obs(q, qd, y);
    MlpCache cache;
    const std::vector<double> raw = forward_cached(model.policy.mean_net, in, cache);
    const std::vector<double> delta = model.apply_mask_clamp(raw);
    std::vector<double> r(n);
    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) {
      r[i] = y[i] + delta[i] - base_action[i];
      loss += r[i] * r[i];
    }
    result.final_loss = loss;
    // grad_y = 2r + J^T 2r, with masked outputs contributing no J term
    std::vector<double> out_grad(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
      const bool masked = !model.joint_mask.empty() && model.joint_mask[i] == 0;
      const bool saturated =
          model.clamp > 0.0 && std::abs(raw[i]) >= model.clamp;
      out_grad[i] = (masked || saturated) ? 0.0 : 2.0 * r[i];
    }
    std::fill(pgrad.begin(), pgrad.end(), 0.0);
    std::vector<double> in_grad;
    backward(model.policy.mean_net, cache, out_grad, pgrad, in_grad);
    for (size_t i = 0; i < n; ++i)
      y[i] -= lr * (2.0 * r[i] + in_grad[2 * n + i]);
  }
  result.action = std::move(y);
  return result;
}

std::vector<double> delta_magnitude_report(const DeltaActionModel& model,
                                           const TrajectoryDataset& dataset) {
  const int n = dataset.n_links;
  std::vector<double> sums(n, 0.0);
  std::int64_t count = 0;
  for (const auto& ep : dataset.episodes) {
    for (int t = 0; t < ep.n_steps(); ++t) {
      const std::vector<double> d =
          model.correction(ep.q[t], ep.qd[t], ep.actions[t]);
      for (int i = 0; i < n; ++i) sums[i] += std::abs(d[i]);
      ++count;
    }
  }
  if (count > 0)
    for (double& s : sums) s /= static_cast<double>(count);
  return sums;
}

}  // namespace dlalign
