#include "dlalign/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dlalign {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& section) {
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw std::invalid_argument("unknown config key '" + key + "' in " +
                                  section);
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).template get<T>();
}

json dynamics_to_json(const DynamicsParams& p) {
  return json{{"n_links", p.n_links},
              {"link_mass", p.link_mass},
              {"link_length", p.link_length},
              {"com_offset", p.com_offset},
              {"joint_damping", p.joint_damping},
              {"gravity", p.gravity},
              {"pd_kp", p.pd_kp},
              {"pd_kd", p.pd_kd},
              {"torque_limit", p.torque_limit},
              {"motor_strength", p.motor_strength},
              {"control_delay_steps", p.control_delay_steps},
              {"dt", p.dt}};
}

DynamicsParams dynamics_from_json(const json& j) {
  reject_unknown(j,
                 {"n_links", "link_mass", "link_length", "com_offset",
                  "joint_damping", "gravity", "pd_kp", "pd_kd", "torque_limit",
                  "motor_strength", "control_delay_steps", "dt"},
                 "dynamics");
  int n = 2;
  get_if(j, "n_links", n);
  DynamicsParams p = default_params(n);
  get_if(j, "link_mass", p.link_mass);
  get_if(j, "link_length", p.link_length);
  get_if(j, "com_offset", p.com_offset);
  get_if(j, "joint_damping", p.joint_damping);
  get_if(j, "gravity", p.gravity);
  get_if(j, "pd_kp", p.pd_kp);
  get_if(j, "pd_kd", p.pd_kd);
  get_if(j, "torque_limit", p.torque_limit);
  get_if(j, "motor_strength", p.motor_strength);
  get_if(j, "control_delay_steps", p.control_delay_steps);
  get_if(j, "dt", p.dt);
  p.validate();
  return p;
}

json gap_to_json(const GapSpec& g) {
  return json{{"mass_ratio", g.mass_ratio},
              {"com_shift", g.com_shift},
              {"kp_ratio", g.kp_ratio},
              {"kd_ratio", g.kd_ratio},
              {"motor_strength_ratio", g.motor_strength_ratio},
              {"extra_delay_steps", g.extra_delay_steps},
              {"extra_damping", g.extra_damping}};
}

GapSpec gap_from_json(const json& j, int n_links) {
  if (j.is_string()) {
    const std::string preset = j.get<std::string>();
    if (preset == "identity") return GapSpec::identity(n_links);
    if (preset == "motor-weak") return motor_weak_gap(n_links);
    throw std::invalid_argument("unknown gap preset '" + preset + "'");
  }
  reject_unknown(j,
                 {"mass_ratio", "com_shift", "kp_ratio", "kd_ratio",
                  "motor_strength_ratio", "extra_delay_steps", "extra_damping"},
                 "gap");
  GapSpec g = GapSpec::identity(n_links);
  get_if(j, "mass_ratio", g.mass_ratio);
  get_if(j, "com_shift", g.com_shift);
  get_if(j, "kp_ratio", g.kp_ratio);
  get_if(j, "kd_ratio", g.kd_ratio);
  get_if(j, "motor_strength_ratio", g.motor_strength_ratio);
  get_if(j, "extra_delay_steps", g.extra_delay_steps);
  get_if(j, "extra_damping", g.extra_damping);
  return g;
}

json ppo_to_json(const PpoConfig& p) {
  return json{{"gamma", p.gamma},
              {"lambda", p.lam},
              {"clip_eps", p.clip_eps},
              {"epochs", p.epochs},
              {"minibatch_size", p.minibatch_size},
              {"lr", p.lr},
              {"lr_final", p.lr_final},
              {"entropy_coef", p.entropy_coef},
              {"value_coef", p.value_coef},
              {"max_grad_norm", p.max_grad_norm},
              {"n_envs", p.n_envs},
              {"rollout_steps", p.rollout_steps},
              {"total_steps", p.total_steps},
              {"hidden_sizes", p.hidden_sizes},
              {"init_log_std", p.init_log_std}};
}

PpoConfig ppo_from_json(const json& j) {
  reject_unknown(j,
                 {"gamma", "lambda", "clip_eps", "epochs", "minibatch_size",
                  "lr", "lr_final", "entropy_coef", "value_coef", "max_grad_norm", "n_envs",
                  "rollout_steps", "total_steps", "hidden_sizes",
                  "init_log_std"},
                 "ppo");
  PpoConfig p;
  get_if(j, "gamma", p.gamma);
  get_if(j, "lambda", p.lam);
  get_if(j, "clip_eps", p.clip_eps);
  get_if(j, "epochs", p.epochs);
  get_if(j, "minibatch_size", p.minibatch_size);
  get_if(j, "lr", p.lr);
  get_if(j, "lr_final", p.lr_final);
  get_if(j, "entropy_coef", p.entropy_coef);
  get_if(j, "value_coef", p.value_coef);
  get_if(j, "max_grad_norm", p.max_grad_norm);
  get_if(j, "n_envs", p.n_envs);
  get_if(j, "rollout_steps", p.rollout_steps);
  get_if(j, "total_steps", p.total_steps);
  get_if(j, "hidden_sizes", p.hidden_sizes);
  get_if(j, "init_log_std", p.init_log_std);
  p.validate();
  return p;
}

json tracking_to_json(const TrackingConfig& t) {
  return json{
      {"weights",
       {{"body_pos", t.weights.body_pos},
        {"end_effector_pos", t.weights.end_effector_pos},
        {"body_vel", t.weights.body_vel},
        {"dof_pos", t.weights.dof_pos},
        {"dof_vel", t.weights.dof_vel},
        {"action_rate", t.weights.action_rate},
        {"torque", t.weights.torque},
        {"dof_pos_limit", t.weights.dof_pos_limit},
        {"dof_vel_limit", t.weights.dof_vel_limit},
        {"torque_limit", t.weights.torque_limit},
        {"termination", t.weights.termination}}},
      {"kernels",
       {{"body_pos", t.kernels.body_pos},
        {"end_effector", t.kernels.end_effector},
        {"body_vel", t.kernels.body_vel},
        {"dof_pos", t.kernels.dof_pos},
        {"dof_vel", t.kernels.dof_vel}}},
      {"curriculum",
       {{"start_threshold", t.curriculum.start_threshold},
        {"end_threshold", t.curriculum.end_threshold},
        {"progress_fraction", t.curriculum.progress_fraction}}},
      {"dr",
       {{"enabled", t.dr.enabled},
        {"kp_scale_lo", t.dr.kp_scale_lo},
        {"kp_scale_hi", t.dr.kp_scale_hi},
        {"delay_lo_ms", t.dr.delay_lo_ms},
        {"delay_hi_ms", t.dr.delay_hi_ms},
        {"damping_scale_lo", t.dr.damping_scale_lo},
        {"damping_scale_hi", t.dr.damping_scale_hi},
        {"impulse_interval_s", t.dr.impulse_interval_s},
        {"impulse_magnitude", t.dr.impulse_magnitude}}},
      {"control_substeps", t.control_substeps}};
}

TrackingConfig tracking_from_json(const json& j) {
  reject_unknown(j, {"weights", "kernels", "curriculum", "dr",
                     "control_substeps"},
                 "tracking");
  TrackingConfig t;
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    reject_unknown(w,
                   {"body_pos", "end_effector_pos", "body_vel", "dof_pos",
                    "dof_vel", "action_rate", "torque", "dof_pos_limit",
                    "dof_vel_limit", "torque_limit", "termination"},
                   "tracking.weights");
    get_if(w, "body_pos", t.weights.body_pos);
    get_if(w, "end_effector_pos", t.weights.end_effector_pos);
    get_if(w, "body_vel", t.weights.body_vel);
    get_if(w, "dof_pos", t.weights.dof_pos);
    get_if(w, "dof_vel", t.weights.dof_vel);
    get_if(w, "action_rate", t.weights.action_rate);
    get_if(w, "torque", t.weights.torque);
    get_if(w, "dof_pos_limit", t.weights.dof_pos_limit);
    get_if(w, "dof_vel_limit", t.weights.dof_vel_limit);
    get_if(w, "torque_limit", t.weights.torque_limit);
    get_if(w, "termination", t.weights.termination);
    t.weights.validate();
  }
  if (j.contains("kernels")) {
    const auto& k = j.at("kernels");
    reject_unknown(k, {"body_pos", "end_effector", "body_vel", "dof_pos",
                       "dof_vel"},
                   "tracking.kernels");
    get_if(k, "body_pos", t.kernels.body_pos);
    get_if(k, "end_effector", t.kernels.end_effector);
    get_if(k, "body_vel", t.kernels.body_vel);
    get_if(k, "dof_pos", t.kernels.dof_pos);
    get_if(k, "dof_vel", t.kernels.dof_vel);
  }
  if (j.contains("curriculum")) {
    const auto& c = j.at("curriculum");
    reject_unknown(c, {"start_threshold", "end_threshold", "progress_fraction"},
                   "tracking.curriculum");
    get_if(c, "start_threshold", t.curriculum.start_threshold);
    get_if(c, "end_threshold", t.curriculum.end_threshold);
    get_if(c, "progress_fraction", t.curriculum.progress_fraction);
  }
  if (j.contains("dr")) {
    const auto& d = j.at("dr");
    reject_unknown(d,
                   {"enabled", "kp_scale_lo", "kp_scale_hi", "delay_lo_ms",
                    "delay_hi_ms", "damping_scale_lo", "damping_scale_hi",
                    "impulse_interval_s", "impulse_magnitude"},
                   "tracking.dr");
    get_if(d, "enabled", t.dr.enabled);
    get_if(d, "kp_scale_lo", t.dr.kp_scale_lo);
    get_if(d, "kp_scale_hi", t.dr.kp_scale_hi);
    get_if(d, "delay_lo_ms", t.dr.delay_lo_ms);
    get_if(d, "delay_hi_ms", t.dr.delay_hi_ms);
    get_if(d, "damping_scale_lo", t.dr.damping_scale_lo);
    get_if(d, "damping_scale_hi", t.dr.damping_scale_hi);
    get_if(d, "impulse_interval_s", t.dr.impulse_interval_s);
    get_if(d, "impulse_magnitude", t.dr.impulse_magnitude);
  }
  get_if(j, "control_substeps", t.control_substeps);
  return t;
}

}  // namespace

GapSpec motor_weak_gap(int n_links) {
  GapSpec g = GapSpec::identity(n_links);
  for (int i = 0; i < std::min(2, n_links); ++i)
    g.motor_strength_ratio[static_cast<size_t>(i)] = 0.7;
  for (auto& r : g.kp_ratio) r = 0.9;
  g.extra_delay_steps = 10;  // +10 ms at 1 kHz physics
  return g;
}

void RunConfig::validate() const {
  dynamics.validate();
  ppo.validate();
  tracking.weights.validate();
  if (motions.per_difficulty < 1)
    throw std::invalid_argument("motions.per_difficulty must be >= 1");
  if (align.collect_episodes < 0)
    throw std::invalid_argument("align.collect_episodes must be >= 0");
  for (int m : align.mask_joints)
    if (m < 0 || m >= dynamics.n_links)
      throw std::invalid_argument("align.mask_joints entries must index joints");
  static const std::set<std::string> kMethods = {
      "asap", "sysid", "delta_dynamics", "noise", "all", "vanilla", "none"};
  if (!kMethods.count(align.method))
    throw std::invalid_argument("unknown align.method '" + align.method + "'");
  if (eval.n_seeds < 1)
    throw std::invalid_argument("eval.n_seeds must be >= 1");
}

namespace {
RunConfig parse_config_checked(const json& j);
}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  reject_unknown(j,
                 {"dynamics", "gap", "motions", "ppo", "tracking", "align",
                  "eval", "io", "seed"},
                 "top level");
  if (j.contains("seed") &&
      !(j.at("seed").is_number_unsigned()))
    throw std::invalid_argument("seed must be a non-negative integer");
  try {
    return parse_config_checked(j);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config type error: ") + e.what());
  }
}

namespace {
RunConfig parse_config_checked(const json& j) {
  RunConfig c;
  if (j.contains("dynamics")) c.dynamics = dynamics_from_json(j.at("dynamics"));
  c.gap = GapSpec::identity(c.dynamics.n_links);
  if (j.contains("gap")) c.gap = gap_from_json(j.at("gap"), c.dynamics.n_links);
  if (j.contains("motions")) {
    const auto& m = j.at("motions");
    reject_unknown(m, {"per_difficulty", "amplitude_scale"}, "motions");
    get_if(m, "per_difficulty", c.motions.per_difficulty);
    get_if(m, "amplitude_scale", c.motions.amplitude_scale);
  }
  if (j.contains("ppo")) c.ppo = ppo_from_json(j.at("ppo"));
  if (j.contains("tracking")) c.tracking = tracking_from_json(j.at("tracking"));
  if (j.contains("align")) {
    const auto& a = j.at("align");
    reject_unknown(a,
                   {"method", "collect_episodes", "horizon_s",
                    "action_norm_weight", "delta_clamp", "mask_joints",
                    "dataset_fraction", "delta_total_steps",
                    "finetune_total_steps", "noise_betas",
                    "delta_dyn_iterations", "delta_dyn_k_end"},
                   "align");
    get_if(a, "method", c.align.method);
    get_if(a, "collect_episodes", c.align.collect_episodes);
    get_if(a, "horizon_s", c.align.horizon_s);
    get_if(a, "action_norm_weight", c.align.action_norm_weight);
    get_if(a, "delta_clamp", c.align.delta_clamp);
    get_if(a, "mask_joints", c.align.mask_joints);
    get_if(a, "dataset_fraction", c.align.dataset_fraction);
    get_if(a, "delta_total_steps", c.align.delta_total_steps);
    get_if(a, "finetune_total_steps", c.align.finetune_total_steps);
    get_if(a, "noise_betas", c.align.noise_betas);
    get_if(a, "delta_dyn_iterations", c.align.delta_dyn_iterations);
    get_if(a, "delta_dyn_k_end", c.align.delta_dyn_k_end);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    reject_unknown(e, {"open_loop_horizons_s", "start_stride_s", "n_seeds"},
                   "eval");
    get_if(e, "open_loop_horizons_s", c.eval.open_loop_horizons_s);
    get_if(e, "start_stride_s", c.eval.start_stride_s);
    get_if(e, "n_seeds", c.eval.n_seeds);
  }
  if (j.contains("io")) {
    const auto& io = j.at("io");
    reject_unknown(io, {"output_dir"}, "io");
    get_if(io, "output_dir", c.io.output_dir);
  }
  get_if(j, "seed", c.seed);
  c.validate();
  return c;
}
}  // namespace

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& c) {
  json j;
  j["dynamics"] = dynamics_to_json(c.dynamics);
  j["gap"] = gap_to_json(c.gap);
  j["motions"] = {{"per_difficulty", c.motions.per_difficulty},
                  {"amplitude_scale", c.motions.amplitude_scale}};
  j["ppo"] = ppo_to_json(c.ppo);
  j["tracking"] = tracking_to_json(c.tracking);
  j["align"] = {{"method", c.align.method},
                {"collect_episodes", c.align.collect_episodes},
                {"horizon_s", c.align.horizon_s},
                {"action_norm_weight", c.align.action_norm_weight},
                {"delta_clamp", c.align.delta_clamp},
                {"mask_joints", c.align.mask_joints},
                {"dataset_fraction", c.align.dataset_fraction},
                {"delta_total_steps", c.align.delta_total_steps},
                {"finetune_total_steps", c.align.finetune_total_steps},
                {"noise_betas", c.align.noise_betas},
                {"delta_dyn_iterations", c.align.delta_dyn_iterations},
                {"delta_dyn_k_end", c.align.delta_dyn_k_end}};
  j["eval"] = {{"open_loop_horizons_s", c.eval.open_loop_horizons_s},
               {"start_stride_s", c.eval.start_stride_s},
               {"n_seeds", c.eval.n_seeds}};
  j["io"] = {{"output_dir", c.io.output_dir}};
  j["seed"] = c.seed;
  return j.dump(2);
}

void save_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << serialize_config(config) << '\n';
}

std::uint64_t config_hash(const RunConfig& config) {
  const std::string s = serialize_config(config);
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace dlalign
