#include "dlalign/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dlalign {

namespace {

void clip_by_global_norm(std::vector<double>& g, double max_norm) {
  double sq = 0.0;
  for (double v : g) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (double& v : g) v *= scale;
  }
}

// Fisher-Yates with the project Rng, deterministic across platforms
void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.uniform_int(0, i));
    std::swap(idx[i], idx[j]);
  }
}

}  // namespace

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("gamma must be in (0, 1]");
  if (!(lam >= 0.0 && lam <= 1.0))
    throw std::invalid_argument("lambda must be in [0, 1]");
  if (!(clip_eps > 0.0)) throw std::invalid_argument("clip_eps must be > 0");
  if (n_envs < 1 || rollout_steps < 1 || epochs < 1 || minibatch_size < 1)
    throw std::invalid_argument("PPO batch parameters must be >= 1");
}

void compute_gae(const std::vector<double>& rewards,
                 const std::vector<double>& values,
                 const std::vector<std::uint8_t>& dones, double gamma,
                 double lam, std::vector<double>& advantages,
                 std::vector<double>& returns) {
  const size_t T = rewards.size();
  if (values.size() != T + 1 || dones.size() != T)
    throw std::invalid_argument("compute_gae shape mismatch");
  advantages.assign(T, 0.0);
  returns.assign(T, 0.0);
  double acc = 0.0;
  for (size_t t = T; t-- > 0;) {
    const double not_done = dones[t] ? 0.0 : 1.0;
    const double delta =
        rewards[t] + gamma * values[t + 1] * not_done - values[t];
    acc = delta + gamma * lam * not_done * acc;
    advantages[t] = acc;
    returns[t] = advantages[t] + values[t];
  }
}

void compute_gae(RolloutBatch& batch, double gamma, double lam) {
  const int T = batch.steps;
  batch.advantages.assign(static_cast<size_t>(batch.n_envs) * T, 0.0);
  batch.returns.assign(static_cast<size_t>(batch.n_envs) * T, 0.0);
  std::vector<double> rewards(T), values(T + 1), adv, ret;
  std::vector<std::uint8_t> dones(T);
  for (int e = 0; e < batch.n_envs; ++e) {
    for (int t = 0; t < T; ++t) {
      const auto i = batch.flat(e, t);
      rewards[t] = batch.rewards[i];
      // a time-limit end bootstraps the terminal value through the reward
      if (batch.dones[i] && batch.time_limits[i])
        rewards[t] += gamma * batch.bootstrap_values[i];
      values[t] = batch.values[i];
      dones[t] = batch.dones[i];
    }
    values[T] = batch.last_values[e];
    compute_gae(rewards, values, dones, gamma, lam, adv, ret);
    for (int t = 0; t < T; ++t) {
      batch.advantages[batch.flat(e, t)] = adv[t];
      batch.returns[batch.flat(e, t)] = ret[t];
    }
  }
}

UpdateReport ppo_update(GaussianPolicy& policy, Mlp& critic,
                        const RolloutBatch& batch, const PpoConfig& config,
                        AdamState& policy_opt, AdamState& critic_opt,
                        Rng& rng) {
  const int N = batch.n_envs * batch.steps;
  const int act_dim = batch.act_dim;

  // normalize advantages across the whole batch
  double mean = 0.0;
  for (double a : batch.advantages) mean += a;
  mean /= N;
  double var = 0.0;
  for (double a : batch.advantages) var += (a - mean) * (a - mean);
  const double stddev = std::sqrt(var / N) + 1e-8;
  std::vector<double> adv(batch.advantages);
  for (double& a : adv) a = (a - mean) / stddev;

  const size_t n_mean_params = policy.mean_net.params.size();
  std::vector<double> mean_grad(n_mean_params, 0.0);
  std::vector<double> std_grad(policy.log_std.size(), 0.0);
  std::vector<double> pgrad(n_mean_params + policy.log_std.size(), 0.0);
  std::vector<double> cgrad(critic.params.size(), 0.0);
  std::vector<double> input_grad;

  UpdateReport report;
  int n_terms = 0;

  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);

  // keep a copy so a non-finite minibatch can abort cleanly
  const GaussianPolicy policy_backup = policy;
  const Mlp critic_backup = critic;
  const AdamState popt_backup = policy_opt;
  const AdamState copt_backup = critic_opt;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_indices(order, rng);
    for (int start = 0; start < N; start += config.minibatch_size) {
      const int end = std::min(N, start + config.minibatch_size);
      const int mb = end - start;
      std::fill(mean_grad.begin(), mean_grad.end(), 0.0);
      std::fill(std_grad.begin(), std_grad.end(), 0.0);
      std::fill(cgrad.begin(), cgrad.end(), 0.0);
      double mb_policy_loss = 0.0, mb_value_loss = 0.0;

      for (int k = start; k < end; ++k) {
        const int idx = order[k];
        const std::vector<double> obs(
            batch.actor_obs.begin() + static_cast<size_t>(idx) * batch.actor_dim,
            batch.actor_obs.begin() +
                static_cast<size_t>(idx + 1) * batch.actor_dim);
        const std::vector<double> cobs(
            batch.critic_obs.begin() +
                static_cast<size_t>(idx) * batch.critic_dim,
            batch.critic_obs.begin() +
                static_cast<size_t>(idx + 1) * batch.critic_dim);
        const std::vector<double> action(
            batch.actions.begin() + static_cast<size_t>(idx) * act_dim,
            batch.actions.begin() + static_cast<size_t>(idx + 1) * act_dim);

        // policy term
        MlpCache cache;
        const std::vector<double> mu =
            forward_cached(policy.mean_net, obs, cache);
        const double logp = policy.log_prob_given_mean(mu, action);
        const double ratio = std::exp(logp - batch.log_probs[idx]);
        const double a = adv[idx];
        const double unclipped = ratio * a;
        const double clipped =
            std::clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps) * a;
        mb_policy_loss += -std::min(unclipped, clipped);

        // gradient flows only when the unclipped branch is active
        const bool active = unclipped <= clipped;
        std::vector<double> dmu(static_cast<size_t>(act_dim), 0.0);
        for (int i = 0; i < act_dim; ++i) {
          const double sigma = std::exp(policy.log_std[i]);
          const double z = (action[i] - mu[i]) / sigma;
          if (active) {
            const double dl_dlogp = -a * ratio / mb;
            dmu[i] = dl_dlogp * (z / sigma);
            std_grad[static_cast<size_t>(i)] += dl_dlogp * (z * z - 1.0);
          }
          // entropy bonus acts on log_std only
          std_grad[static_cast<size_t>(i)] += -config.entropy_coef / mb;
        }
        backward(policy.mean_net, cache, dmu, mean_grad, input_grad);

        // value term
        MlpCache vcache;
        const std::vector<double> v = forward_cached(critic, cobs, vcache);
        const double verr = v[0] - batch.returns[idx];
        mb_value_loss += 0.5 * verr * verr;
        const std::vector<double> dv = {config.value_coef * verr / mb};
        backward(critic, vcache, dv, cgrad, input_grad);
      }

      mb_policy_loss /= mb;
      mb_value_loss /= mb;
      if (!std::isfinite(mb_policy_loss) || !std::isfinite(mb_value_loss)) {
        policy = policy_backup;
        critic = critic_backup;
        policy_opt = popt_backup;
        critic_opt = copt_backup;
        report.aborted = true;
        return report;
      }
      report.policy_loss += mb_policy_loss;
      report.value_loss += mb_value_loss;
      ++n_terms;

      std::copy(mean_grad.begin(), mean_grad.end(), pgrad.begin());
      std::copy(std_grad.begin(), std_grad.end(),
                pgrad.begin() + static_cast<long>(n_mean_params));
      clip_by_global_norm(pgrad, config.max_grad_norm);
      clip_by_global_norm(cgrad, config.max_grad_norm);

      // policy params live in one flat optimizer vector
      std::vector<double> flat(policy.mean_net.params);
      flat.insert(flat.end(), policy.log_std.begin(), policy.log_std.end());
      adam_step(flat, pgrad, policy_opt, config.lr);
      std::copy(flat.begin(), flat.begin() + static_cast<long>(n_mean_params),
                policy.mean_net.params.begin());
      std::copy(flat.begin() + static_cast<long>(n_mean_params), flat.end(),
                policy.log_std.begin());
      policy.clamp_log_std();
      adam_step(critic.params, cgrad, critic_opt, config.lr);
    }
  }
  if (n_terms > 0) {
    report.policy_loss /= n_terms;
    report.value_loss /= n_terms;
  }
  report.entropy = policy.entropy();
  return report;
}

TrainResult train(const EnvFactory& factory, const PpoConfig& config,
                  std::uint64_t seed, const TrainOptions& options) {
  config.validate();
  Rng master = make_rng(seed);
  Rng update_rng = master.split(0x5eed);

  std::vector<std::unique_ptr<Env>> envs;
  std::vector<Rng> env_rngs;
  for (int e = 0; e < config.n_envs; ++e) {
    envs.push_back(factory(e));
    env_rngs.push_back(master.split(1000 + static_cast<std::uint64_t>(e)));
  }

  const int actor_dim = envs[0]->actor_obs_dim();
  const int critic_dim = envs[0]->critic_obs_dim();
  const int act_dim = envs[0]->action_dim();

  MlpSpec pspec{{}, config.activation};
  pspec.layer_sizes.push_back(actor_dim);
  for (int h : config.hidden_sizes) pspec.layer_sizes.push_back(h);
  pspec.layer_sizes.push_back(act_dim);
  MlpSpec cspec{{}, config.activation};
  cspec.layer_sizes.push_back(critic_dim);
  for (int h : config.hidden_sizes) cspec.layer_sizes.push_back(h);
  cspec.layer_sizes.push_back(1);

  Rng init_rng = master.split(0x1417);
  TrainResult result;
  result.policy = options.init_policy
                      ? *options.init_policy
                      : GaussianPolicy::create(pspec, init_rng, config.init_log_std);
  result.critic = options.init_critic ? *options.init_critic
                                      : Mlp::create(cspec, init_rng);

  AdamState popt = AdamState::zeros(result.policy.mean_net.params.size() +
                                    result.policy.log_std.size());
  AdamState copt = AdamState::zeros(result.critic.params.size());

  const std::int64_t steps_per_update =
      static_cast<std::int64_t>(config.n_envs) * config.rollout_steps;

  double threshold = options.curriculum
                         ? options.curriculum(0, config.total_steps)
                         : 0.0;
  for (auto& env : envs) {
    if (options.curriculum) env->set_termination_threshold(threshold);
    // each env owns its reset stream
  }
  for (int e = 0; e < config.n_envs; ++e) envs[e]->reset(env_rngs[e]);

  RolloutBatch batch;
  batch.n_envs = config.n_envs;
  batch.steps = config.rollout_steps;
  batch.actor_dim = actor_dim;
  batch.critic_dim = critic_dim;
  batch.act_dim = act_dim;
  const size_t total = static_cast<size_t>(config.n_envs) * config.rollout_steps;
  batch.actor_obs.resize(total * actor_dim);
  batch.critic_obs.resize(total * critic_dim);
  batch.actions.resize(total * act_dim);
  batch.log_probs.resize(total);
  batch.rewards.resize(total);
  batch.values.resize(total);
  batch.dones.resize(total);
  batch.time_limits.resize(total);
  batch.bootstrap_values.resize(total);
  batch.last_values.resize(config.n_envs);

  // episodic statistics
  std::vector<double> ep_return(config.n_envs, 0.0);
  std::vector<int> ep_len(config.n_envs, 0);
  double recent_return = 0.0, recent_len = 0.0;
  int recent_count = 0;

  std::int64_t env_steps = 0;
  int update = 0;
  std::vector<double> aobs(actor_dim), cobs(critic_dim);

  while (env_steps < config.total_steps) {
    recent_return = 0.0;
    recent_len = 0.0;
    recent_count = 0;
    for (int t = 0; t < config.rollout_steps; ++t) {
      for (int e = 0; e < config.n_envs; ++e) {
        const auto i = batch.flat(e, t);
        envs[e]->observe(aobs, cobs);
        std::copy(aobs.begin(), aobs.end(),
                  batch.actor_obs.begin() + static_cast<size_t>(i) * actor_dim);
        std::copy(cobs.begin(), cobs.end(),
                  batch.critic_obs.begin() + static_cast<size_t>(i) * critic_dim);
        const std::vector<double> mu = result.policy.mean(aobs);
        std::vector<double> action = mu;
        for (int k = 0; k < act_dim; ++k)
          action[k] += std::exp(result.policy.log_std[k]) * env_rngs[e].normal();
        batch.log_probs[i] = result.policy.log_prob_given_mean(mu, action);
        std::copy(action.begin(), action.end(),
                  batch.actions.begin() + static_cast<size_t>(i) * act_dim);
        batch.values[i] = result.critic.forward(cobs)[0];

        const Env::StepOutcome out = envs[e]->step(action, env_rngs[e]);
        batch.rewards[i] = out.reward;
        batch.dones[i] = out.done ? 1 : 0;
        batch.time_limits[i] = out.time_limit ? 1 : 0;
        batch.bootstrap_values[i] = 0.0;
        ep_return[e] += out.reward;
        ep_len[e] += 1;
        if (out.done) {
          if (out.time_limit) {
            envs[e]->observe(aobs, cobs);
            batch.bootstrap_values[i] = result.critic.forward(cobs)[0];
          }
          recent_return += ep_return[e];
          recent_len += ep_len[e];
          ++recent_count;
          ep_return[e] = 0.0;
          ep_len[e] = 0;
          envs[e]->reset(env_rngs[e]);
        }
      }
    }
    for (int e = 0; e < config.n_envs; ++e) {
      envs[e]->observe(aobs, cobs);
      batch.last_values[e] = result.critic.forward(cobs)[0];
    }

    compute_gae(batch, config.gamma, config.lam);
    PpoConfig step_config = config;
    if (config.lr_final >= 0.0) {
      const double frac =
          std::min(1.0, static_cast<double>(env_steps) / config.total_steps);
      step_config.lr = config.lr + (config.lr_final - config.lr) * frac;
    }
    const UpdateReport rep = ppo_update(result.policy, result.critic, batch,
                                        step_config, popt, copt, update_rng);
    env_steps += steps_per_update;
    ++update;

    if (options.curriculum) {
      threshold = options.curriculum(env_steps, config.total_steps);
      for (auto& env : envs) env->set_termination_threshold(threshold);
    }

    UpdateLog log;
    log.update = update;
    log.env_steps = env_steps;
    log.mean_reward = recent_count > 0 ? recent_return / recent_count : 0.0;
    log.mean_ep_len = recent_count > 0 ? recent_len / recent_count : 0.0;
    log.curriculum_threshold = threshold;
    log.policy_loss = rep.policy_loss;
    log.value_loss = rep.value_loss;
    log.entropy = rep.entropy;
    result.curves.push_back(log);
    if (options.on_update) options.on_update(log);
    if (options.on_snapshot && options.snapshot_every > 0 &&
        update % options.snapshot_every == 0)
      options.on_snapshot(result.policy, result.critic);

    if (rep.aborted) {
      result.diverged = true;
      break;
    }
  }
  return result;
}

}  // namespace dlalign
