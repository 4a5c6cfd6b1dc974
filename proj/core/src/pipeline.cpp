#include "dlalign/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "dlalign/align.hpp"
#include "dlalign/evalkit.hpp"
#include "dlalign/svgplot.hpp"

namespace fs = std::filesystem;

namespace dlalign {

const char* kToolVersion = "dlalign-1.0.0";

namespace {

using nlohmann::json;

void log_line(const PipelineContext& ctx, const std::string& msg) {
  if (!ctx.quiet) std::cout << "[dlalign] " << msg << std::endl;
}

std::vector<FileDigest> digest_all(const PipelineContext& ctx,
                                   const std::vector<std::string>& rels) {
  std::vector<FileDigest> out;
  for (const auto& rel : rels)
    out.push_back({rel, file_digest(ctx.path(rel))});
  return out;
}

void record_stage(PipelineContext& ctx, const std::string& stage,
                  const std::vector<std::string>& input_rels,
                  const std::vector<std::string>& output_rels) {
  StageRecord rec;
  rec.stage = stage;
  rec.inputs = digest_all(ctx, input_rels);
  rec.outputs = digest_all(ctx, output_rels);
  rec.completed_at = current_timestamp();
  ctx.manifest.stages.push_back(std::move(rec));
  save_manifest(ctx.manifest, ctx.path("manifest.json"));
}

bool skip_if_done(PipelineContext& ctx, const std::string& stage) {
  if (stage_satisfied(ctx.manifest, stage, ctx.out)) {
    log_line(ctx, stage + ": up to date, skipping");
    return true;
  }
  return false;
}

void ensure_dir(const std::string& path) { fs::create_directories(path); }

std::vector<std::string> motion_rel_files(const MotionSet& set) {
  std::vector<std::string> rels;
  for (const auto& m : set.motions) rels.push_back("motions/" + m.name + ".mot");
  rels.push_back("motions/index.json");
  return rels;
}

MotionSet load_motion_set(const PipelineContext& ctx) {
  std::ifstream in(ctx.path("motions/index.json"));
  if (!in) throw DigestError("missing motions/index.json");
  json j = json::parse(in);
  MotionSet set;
  for (const auto& name : j.at("names"))
    set.motions.push_back(
        load_motion(ctx.path("motions/" + name.get<std::string>() + ".mot")));
  set.train_names = j.at("train").get<std::vector<std::string>>();
  set.holdout_names = j.at("holdout").get<std::vector<std::string>>();
  return set;
}

void write_curves_csv(const std::string& path,
                      const std::vector<UpdateLog>& curves) {
  std::ofstream os(path);
  os << "# frames are control-rate frames (100 Hz default)\n";
  os << "update,env_steps,mean_reward,mean_ep_len,curriculum_threshold,"
        "policy_loss,value_loss,entropy\n";
  os << std::setprecision(17);
  for (const auto& c : curves)
    os << c.update << ',' << c.env_steps << ',' << c.mean_reward << ','
       << c.mean_ep_len << ',' << c.curriculum_threshold << ','
       << c.policy_loss << ',' << c.value_loss << ',' << c.entropy << '\n';
}

DeltaTrainConfig make_delta_config(const RunConfig& cfg) {
  DeltaTrainConfig d;
  const DeltaTrainConfig defaults;
  d.ppo = cfg.ppo;
  d.ppo.total_steps = cfg.align.delta_total_steps;
  d.ppo.entropy_coef = defaults.ppo.entropy_coef;
  d.ppo.init_log_std = defaults.ppo.init_log_std;
  d.ppo.lr_final = defaults.ppo.lr_final;
  d.ppo.hidden_sizes = defaults.ppo.hidden_sizes;
  d.horizon_s = cfg.align.horizon_s;
  d.action_norm_weight = cfg.align.action_norm_weight;
  d.clamp = cfg.align.delta_clamp;
  d.dataset_fraction = cfg.align.dataset_fraction;
  if (!cfg.align.mask_joints.empty()) {
    d.joint_mask.assign(static_cast<size_t>(cfg.dynamics.n_links), 0);
    for (int jnt : cfg.align.mask_joints)
      d.joint_mask[static_cast<size_t>(jnt)] = 1;
  }
  return d;
}

FinetuneConfig make_finetune_config(const RunConfig& cfg) {
  FinetuneConfig f;
  const FinetuneConfig defaults;
  f.ppo = cfg.ppo;
  f.ppo.total_steps = cfg.align.finetune_total_steps;
  f.ppo.init_log_std = defaults.ppo.init_log_std;
  f.ppo.lr = defaults.ppo.lr;
  f.ppo.lr_final = defaults.ppo.lr_final;
  f.ppo.entropy_coef = defaults.ppo.entropy_coef;
  return f;
}

GaussianPolicy load_pretrained(const PipelineContext& ctx, Mlp* critic) {
  verify_inputs(ctx.manifest, "pretrain",
                {"pretrain/policy.ckpt", "pretrain/critic.mlp"}, ctx.out);
  if (critic != nullptr) *critic = load_mlp(ctx.path("pretrain/critic.mlp"));
  return load_checkpoint(ctx.path("pretrain/policy.ckpt"));
}

SysIdGridPoint load_sysid_best(const PipelineContext& ctx) {
  verify_inputs(ctx.manifest, "sysid", {"sysid/best.json"}, ctx.out);
  std::ifstream in(ctx.path("sysid/best.json"));
  json j = json::parse(in);
  SysIdGridPoint p;
  p.com_shift = j.at("com_shift").get<double>();
  p.mass_ratio = j.at("mass_ratio").get<double>();
  p.kp_ratio = j.at("kp_ratio").get<double>();
  p.kd_ratio = j.at("kd_ratio").get<double>();
  p.replay_error = j.at("replay_error").get<double>();
  return p;
}

std::string beta_dir(size_t i) { return "noise/beta_" + std::to_string(i); }

struct MethodEval {
  std::string method;
  ClosedLoopReport report;
};

}  // namespace

PipelineContext open_pipeline(const RunConfig& config, bool resume) {
  PipelineContext ctx;
  ctx.config = config;
  ctx.out = config.io.output_dir;
  ensure_dir(ctx.out);

  const std::string lock = ctx.path("pipeline.lock");
  if (fs::exists(lock))
    throw std::runtime_error(
        "output directory is locked (pipeline.lock exists): " + ctx.out);
  std::ofstream(lock) << "locked\n";

  const std::string manifest_path = ctx.path("manifest.json");
  const std::uint64_t hash = config_hash(config);
  if (fs::exists(manifest_path)) {
    ctx.manifest = load_manifest(manifest_path);
    if (ctx.manifest.config_hash != hash) {
      std::error_code ec;
      fs::remove(lock, ec);  // rejected opens must not hold the lock
      throw std::invalid_argument(
          "existing manifest was produced by a different config; use a fresh "
          "output directory");
    }
    (void)resume;  // reruns always resume via digest-matched stage skips
  } else {
    ctx.manifest.tool_version = kToolVersion;
    ctx.manifest.config_hash = hash;
    ctx.manifest.config_json = serialize_config(config);
    ctx.manifest.seed = config.seed;
    save_manifest(ctx.manifest, manifest_path);
  }
  save_config(config, ctx.path("config.json"));
  return ctx;
}

void close_pipeline(const PipelineContext& ctx) {
  std::error_code ec;
  fs::remove(ctx.path("pipeline.lock"), ec);
}

void run_gen_motions(PipelineContext& ctx) {
  if (skip_if_done(ctx, "gen_motions")) return;
  log_line(ctx, "gen_motions: generating reference motions");
  const MotionSet set =
      default_motion_set(ctx.config.seed, ctx.config.dynamics,
                         ctx.config.motions.per_difficulty,
                         ctx.config.motions.amplitude_scale);
  ensure_dir(ctx.path("motions"));
  for (const auto& m : set.motions)
    save_motion(m, ctx.path("motions/" + m.name + ".mot"));
  json index;
  index["names"] = json::array();
  for (const auto& m : set.motions) index["names"].push_back(m.name);
  index["train"] = set.train_names;
  index["holdout"] = set.holdout_names;
  std::ofstream(ctx.path("motions/index.json")) << index.dump(2) << '\n';
  record_stage(ctx, "gen_motions", {}, motion_rel_files(set));
}

void run_pretrain(PipelineContext& ctx) {
  if (skip_if_done(ctx, "pretrain")) return;
  const MotionSet set = load_motion_set(ctx);
  verify_inputs(ctx.manifest, "gen_motions", motion_rel_files(set), ctx.out);
  log_line(ctx, "pretrain: PPO motion tracking (" +
                    std::to_string(ctx.config.ppo.total_steps) + " steps)");

  auto motions = std::make_shared<MotionSet>(set);
  const auto train_split = motions->train_split();
  TrackingEnvOptions opt;
  opt.rsi = true;
  opt.control_substeps = ctx.config.tracking.control_substeps;
  opt.dr = ctx.config.tracking.dr;
  const RewardWeights weights = ctx.config.tracking.weights;
  const KernelScales kernels = ctx.config.tracking.kernels;
  const DynamicsParams params = ctx.config.dynamics;
  const EnvFactory factory = [motions, train_split, params, weights, kernels,
                              opt](int) {
    return std::make_unique<TrackingEnv>(params, train_split, weights, kernels,
                                         opt);
  };
  TrainOptions topt;
  const CurriculumConfig cc = ctx.config.tracking.curriculum;
  topt.curriculum = [cc](std::int64_t done, std::int64_t total) {
    return cc.threshold_at(done, total);
  };
  const TrainResult result = train(factory, ctx.config.ppo, ctx.config.seed,
                                   topt);
  if (result.diverged)
    throw NumericError("pretraining diverged (non-finite loss)");

  ensure_dir(ctx.path("pretrain"));
  save_checkpoint(result.policy, ctx.path("pretrain/policy.ckpt"));
  save_mlp(result.critic, ctx.path("pretrain/critic.mlp"));
  write_curves_csv(ctx.path("pretrain/curves.csv"), result.curves);
  record_stage(ctx, "pretrain", motion_rel_files(set),
               {"pretrain/policy.ckpt", "pretrain/critic.mlp",
                "pretrain/curves.csv"});
}

void run_collect(PipelineContext& ctx) {
  if (skip_if_done(ctx, "collect")) return;
  const MotionSet set = load_motion_set(ctx);
  const GaussianPolicy policy = load_pretrained(ctx, nullptr);
  const DynamicsParams real_params =
      apply_gap(ctx.config.dynamics, ctx.config.gap);
  const int n_train = ctx.config.align.collect_episodes;
  const int n_holdout =
      std::max(static_cast<int>(set.holdout_names.size()), n_train / 5);
  log_line(ctx, "collect: " + std::to_string(n_train) + " train + " +
                    std::to_string(n_holdout) + " holdout episodes");

  TrajectoryDataset train_ds = collect_rollouts(
      policy, real_params, set.train_split(), n_train, ctx.config.seed,
      ctx.config.tracking.control_substeps);
  TrajectoryDataset holdout_ds = collect_rollouts(
      policy, real_params, set.holdout_split(), n_holdout, ctx.config.seed + 1,
      ctx.config.tracking.control_substeps);
  ensure_dir(ctx.path("collect"));
  save_dataset(train_ds, ctx.path("collect/train.traj"));
  save_dataset(holdout_ds, ctx.path("collect/holdout.traj"));
  record_stage(ctx, "collect", {"pretrain/policy.ckpt"},
               {"collect/train.traj", "collect/holdout.traj"});
}

void run_train_delta(PipelineContext& ctx) {
  if (skip_if_done(ctx, "train_delta")) return;
  verify_inputs(ctx.manifest, "collect", {"collect/train.traj"}, ctx.out);
  const TrajectoryDataset ds = load_dataset(ctx.path("collect/train.traj"));
  const DeltaTrainConfig dcfg = make_delta_config(ctx.config);
  log_line(ctx, "train_delta: delta action model (" +
                    std::to_string(dcfg.ppo.total_steps) + " steps)");
  std::vector<UpdateLog> curves;
  const DeltaActionModel model = train_delta_action(
      ds, ctx.config.dynamics, dcfg, ctx.config.seed + 2, &curves);

  ensure_dir(ctx.path("delta"));
  save_delta_model(model, ctx.path("delta/model.delta"));
  write_curves_csv(ctx.path("delta/curves.csv"), curves);
  const std::vector<double> mags = delta_magnitude_report(model, ds);
  {
    std::ofstream os(ctx.path("delta/magnitude.csv"));
    os << "# frames are control-rate frames (100 Hz default)\n";
    os << "joint,mean_abs_delta\n" << std::setprecision(17);
    for (size_t i = 0; i < mags.size(); ++i) os << i << ',' << mags[i] << '\n';
  }
  record_stage(ctx, "train_delta", {"collect/train.traj"},
               {"delta/model.delta", "delta/model.delta.ckpt",
                "delta/curves.csv", "delta/magnitude.csv"});
}

void run_train_delta_dyn(PipelineContext& ctx) {
  if (skip_if_done(ctx, "train_delta_dyn")) return;
  verify_inputs(ctx.manifest, "collect", {"collect/train.traj"}, ctx.out);
  const TrajectoryDataset ds = load_dataset(ctx.path("collect/train.traj"));
  DeltaDynTrainConfig dcfg;
  dcfg.iterations = ctx.config.align.delta_dyn_iterations;
  dcfg.k_end = ctx.config.align.delta_dyn_k_end;
  dcfg.hidden_sizes = ctx.config.ppo.hidden_sizes;
  dcfg.dataset_fraction = ctx.config.align.dataset_fraction;
  log_line(ctx, "train_delta_dyn: residual dynamics model (" +
                    std::to_string(dcfg.iterations) + " iterations)");
  const DeltaDynResult result = train_delta_dynamics(
      ds, ctx.config.dynamics, dcfg, ctx.config.seed + 3,
      ctx.config.tracking.control_substeps);
  if (!std::isfinite(result.final_one_step_mse))
    throw NumericError("delta dynamics training produced non-finite MSE");

  ensure_dir(ctx.path("delta_dyn"));
  save_mlp(result.model.net, ctx.path("delta_dyn/model.mlp"));
  {
    std::ofstream os(ctx.path("delta_dyn/result.csv"));
    os << "# frames are control-rate frames (100 Hz default)\n";
    os << "final_one_step_mse\n"
       << std::setprecision(17) << result.final_one_step_mse << '\n';
  }
  record_stage(ctx, "train_delta_dyn", {"collect/train.traj"},
               {"delta_dyn/model.mlp", "delta_dyn/result.csv"});
}

void run_sysid(PipelineContext& ctx) {
  if (skip_if_done(ctx, "sysid")) return;
  verify_inputs(ctx.manifest, "collect", {"collect/train.traj"}, ctx.out);
  const TrajectoryDataset ds = load_dataset(ctx.path("collect/train.traj"));
  log_line(ctx, "sysid: 81-point grid search");
  const SysIdResult result = sysid_grid_search(
      ds, ctx.config.dynamics, SysIdGrid{}, ctx.config.align.horizon_s,
      ctx.config.tracking.control_substeps);

  ensure_dir(ctx.path("sysid"));
  {
    std::ofstream os(ctx.path("sysid/result.csv"));
    os << "# frames are control-rate frames (100 Hz default)\n";
    os << "com_shift,mass_ratio,kp_ratio,kd_ratio,replay_error,best\n"
       << std::setprecision(17);
    for (const auto& p : result.all) {
      const bool best = p.com_shift == result.best.com_shift &&
                        p.mass_ratio == result.best.mass_ratio &&
                        p.kp_ratio == result.best.kp_ratio &&
                        p.kd_ratio == result.best.kd_ratio;
      os << p.com_shift << ',' << p.mass_ratio << ',' << p.kp_ratio << ','
         << p.kd_ratio << ',' << p.replay_error << ',' << (best ? 1 : 0)
         << '\n';
    }
  }
  {
    json j{{"com_shift", result.best.com_shift},
           {"mass_ratio", result.best.mass_ratio},
           {"kp_ratio", result.best.kp_ratio},
           {"kd_ratio", result.best.kd_ratio},
           {"replay_error", result.best.replay_error}};
    std::ofstream(ctx.path("sysid/best.json")) << j.dump(2) << '\n';
  }
  record_stage(ctx, "sysid", {"collect/train.traj"},
               {"sysid/result.csv", "sysid/best.json"});
}

void run_finetune(PipelineContext& ctx, const std::string& method) {
  const std::string stage = "finetune_" + method;
  if (skip_if_done(ctx, stage)) return;
  const MotionSet set = load_motion_set(ctx);
  Mlp critic;
  const GaussianPolicy pretrained = load_pretrained(ctx, &critic);

  FinetuneConfig fcfg = make_finetune_config(ctx.config);
  DynamicsParams sim_params = ctx.config.dynamics;
  ActionHook hook;
  std::vector<std::string> inputs = {"pretrain/policy.ckpt",
                                     "pretrain/critic.mlp"};
  // keep loaded models alive through training
  std::shared_ptr<DeltaActionModel> delta;
  std::shared_ptr<DeltaDynamicsModel> delta_dyn;
  if (method == "asap") {
    verify_inputs(ctx.manifest, "train_delta",
                  {"delta/model.delta", "delta/model.delta.ckpt"}, ctx.out);
    delta = std::make_shared<DeltaActionModel>(
        load_delta_model(ctx.path("delta/model.delta")));
    hook = make_delta_hook(*delta);
    inputs.push_back("delta/model.delta");
    inputs.push_back("delta/model.delta.ckpt");
  } else if (method == "sysid") {
    sim_params = sysid_point_params(ctx.config.dynamics, load_sysid_best(ctx));
    inputs.push_back("sysid/best.json");
  } else if (method == "delta_dynamics") {
    verify_inputs(ctx.manifest, "train_delta_dyn", {"delta_dyn/model.mlp"},
                  ctx.out);
    delta_dyn = std::make_shared<DeltaDynamicsModel>();
    delta_dyn->net = load_mlp(ctx.path("delta_dyn/model.mlp"));
    fcfg.step_hook = [delta_dyn](const SimState& s,
                                 const std::vector<double>& a,
                                 const DynamicsParams& p, int substeps) {
      return step_with_residual(s, a, p, *delta_dyn, substeps);
    };
    inputs.push_back("delta_dyn/model.mlp");
  } else if (method != "plain") {
    throw std::invalid_argument("unknown finetune method: " + method);
  }

  log_line(ctx, stage + ": PPO fine-tuning (" +
                    std::to_string(fcfg.ppo.total_steps) + " steps)");
  std::vector<UpdateLog> curves;
  const GaussianPolicy tuned = finetune_policy(
      pretrained, critic, sim_params, set.train_split(), hook, fcfg,
      ctx.config.seed + 7, &curves);

  const std::string dir = "finetune/" + method;
  ensure_dir(ctx.path(dir));
  save_checkpoint(tuned, ctx.path(dir + "/policy.ckpt"));
  write_curves_csv(ctx.path(dir + "/curves.csv"), curves);
  record_stage(ctx, stage, inputs, {dir + "/policy.ckpt", dir + "/curves.csv"});
}

void run_noise_finetune(PipelineContext& ctx) {
  if (skip_if_done(ctx, "noise_finetune")) return;
  const MotionSet set = load_motion_set(ctx);
  Mlp critic;
  const GaussianPolicy pretrained = load_pretrained(ctx, &critic);
  const FinetuneConfig fcfg = make_finetune_config(ctx.config);

  std::vector<std::string> outputs = {"noise/betas.csv"};
  ensure_dir(ctx.path("noise"));
  {
    std::ofstream os(ctx.path("noise/betas.csv"));
    os << "index,beta\n" << std::setprecision(17);
    for (size_t i = 0; i < ctx.config.align.noise_betas.size(); ++i)
      os << i << ',' << ctx.config.align.noise_betas[i] << '\n';
  }
  for (size_t i = 0; i < ctx.config.align.noise_betas.size(); ++i) {
    const double beta = ctx.config.align.noise_betas[i];
    log_line(ctx, "noise_finetune: beta=" + std::to_string(beta));
    const GaussianPolicy tuned = finetune_policy(
        pretrained, critic, ctx.config.dynamics, set.train_split(),
        make_noise_hook(beta), fcfg, ctx.config.seed + 11 + i, nullptr);
    ensure_dir(ctx.path(beta_dir(i)));
    save_checkpoint(tuned, ctx.path(beta_dir(i) + "/policy.ckpt"));
    outputs.push_back(beta_dir(i) + "/policy.ckpt");
  }
  record_stage(ctx, "noise_finetune",
               {"pretrain/policy.ckpt", "pretrain/critic.mlp"}, outputs);
}

void run_eval_open(PipelineContext& ctx) {
  if (skip_if_done(ctx, "eval_open")) return;
  verify_inputs(ctx.manifest, "collect", {"collect/holdout.traj"}, ctx.out);
  const TrajectoryDataset holdout =
      load_dataset(ctx.path("collect/holdout.traj"));
  log_line(ctx, "eval_open: open-loop replay on held-out episodes");

  OpenLoopConfig ocfg;
  ocfg.horizons_s = ctx.config.eval.open_loop_horizons_s;
  ocfg.start_stride_s = ctx.config.eval.start_stride_s;
  ocfg.control_substeps = ctx.config.tracking.control_substeps;

  std::vector<std::string> inputs = {"collect/holdout.traj"};
  OpenLoopReport merged = open_loop_eval(holdout, ctx.config.dynamics,
                                         Corrector::kNone, nullptr, nullptr,
                                         nullptr, ocfg);

  std::unique_ptr<DeltaActionModel> delta;
  if (ctx.manifest.find("train_delta") != nullptr) {
    verify_inputs(ctx.manifest, "train_delta",
                  {"delta/model.delta", "delta/model.delta.ckpt"}, ctx.out);
    delta = std::make_unique<DeltaActionModel>(
        load_delta_model(ctx.path("delta/model.delta")));
    const OpenLoopReport r = open_loop_eval(
        holdout, ctx.config.dynamics, Corrector::kDeltaAction, delta.get(),
        nullptr, nullptr, ocfg);
    merged.entries.insert(merged.entries.end(), r.entries.begin(),
                          r.entries.end());
    inputs.push_back("delta/model.delta");
  }
  if (ctx.manifest.find("train_delta_dyn") != nullptr) {
    verify_inputs(ctx.manifest, "train_delta_dyn", {"delta_dyn/model.mlp"},
                  ctx.out);
    DeltaDynamicsModel dyn;
    dyn.net = load_mlp(ctx.path("delta_dyn/model.mlp"));
    const OpenLoopReport r = open_loop_eval(
        holdout, ctx.config.dynamics, Corrector::kDeltaDynamics, nullptr, &dyn,
        nullptr, ocfg);
    merged.entries.insert(merged.entries.end(), r.entries.begin(),
                          r.entries.end());
    inputs.push_back("delta_dyn/model.mlp");
  }
  if (ctx.manifest.find("sysid") != nullptr) {
    const DynamicsParams sp =
        sysid_point_params(ctx.config.dynamics, load_sysid_best(ctx));
    const OpenLoopReport r = open_loop_eval(
        holdout, ctx.config.dynamics, Corrector::kSysIdParams, nullptr,
        nullptr, &sp, ocfg);
    merged.entries.insert(merged.entries.end(), r.entries.begin(),
                          r.entries.end());
    inputs.push_back("sysid/best.json");
  }

  ensure_dir(ctx.path("eval/plots"));
  write_open_loop_csv(merged, ctx.path("eval/open_loop.csv"));

  std::vector<PlotSeries> series;
  for (const auto& e : merged.entries) {
    const std::string label = to_string(e.corrector);
    auto it = std::find_if(series.begin(), series.end(),
                           [&](const PlotSeries& s) { return s.label == label; });
    if (it == series.end()) {
      series.push_back({label, {}, {}});
      it = series.end() - 1;
    }
    it->x.push_back(e.horizon_s);
    it->y.push_back(e.metrics.e_g_mpjpe);
  }
  LinePlotOptions lopt;
  lopt.title = "Open-loop replay error";
  lopt.x_label = "horizon (s)";
  lopt.y_label = "E_g_mpjpe (mm)";
  write_line_plot(ctx.path("eval/plots/open_loop.svg"), series, lopt);

  std::vector<std::string> outputs = {"eval/open_loop.csv",
                                      "eval/plots/open_loop.svg"};
  if (delta) {
    const std::vector<double> mags = delta_magnitude_report(*delta, holdout);
    std::vector<std::string> labels;
    for (size_t i = 0; i < mags.size(); ++i)
      labels.push_back("joint " + std::to_string(i));
    write_bar_plot(ctx.path("eval/plots/delta_magnitude.svg"), labels, mags,
                   "Per-joint delta action magnitude", "mean |delta a| (rad)");
    outputs.push_back("eval/plots/delta_magnitude.svg");
  }

  // gap significance: identity gaps or negligible improvement get flagged
  {
    const double longest = *std::max_element(ocfg.horizons_s.begin(),
                                             ocfg.horizons_s.end());
    const double none_err = merged.at(Corrector::kNone, longest).metrics.e_g_mpjpe;
    std::ofstream os(ctx.path("eval/summary.txt"));
    os << std::setprecision(6);
    os << "open-loop E_g_mpjpe at " << longest << " s, no corrector: "
       << none_err << " mm\n";
    if (delta) {
      const double asap_err =
          merged.at(Corrector::kDeltaAction, longest).metrics.e_g_mpjpe;
      const double improvement = none_err - asap_err;
      const double noise_floor = std::max(1e-6, 0.02 * none_err);
      os << "open-loop E_g_mpjpe at " << longest << " s, delta action: "
         << asap_err << " mm\n";
      os << "improvement: " << improvement << " mm (noise floor "
         << noise_floor << " mm)\n";
      if (improvement < noise_floor) os << "no significant gap detected\n";
    } else if (none_err < 1e-6) {
      os << "no significant gap detected\n";
    }
    outputs.push_back("eval/summary.txt");
  }
  record_stage(ctx, "eval_open", inputs, outputs);
}

void run_eval_closed(PipelineContext& ctx) {
  if (skip_if_done(ctx, "eval_closed")) return;
  const MotionSet set = load_motion_set(ctx);
  std::vector<const ReferenceMotion*> motions;
  for (const auto& m : set.motions) motions.push_back(&m);
  const DynamicsParams real_params =
      apply_gap(ctx.config.dynamics, ctx.config.gap);
  log_line(ctx, "eval_closed: closed-loop tracking in the gapped environment");

  std::vector<std::string> inputs = {"pretrain/policy.ckpt"};
  std::vector<std::string> outputs;
  std::vector<MethodEval> evals;

  auto evaluate = [&](const std::string& method, const GaussianPolicy& p) {
    MethodEval me;
    me.method = method;
    me.report = closed_loop_eval(p, real_params, motions,
                                 ctx.config.eval.n_seeds, ctx.config.seed + 23,
                                 {}, ctx.config.tracking.control_substeps);
    const std::string rel = "eval/closed_" + method + ".csv";
    write_closed_loop_csv(me.report, ctx.path(rel), method);
    outputs.push_back(rel);
    evals.push_back(std::move(me));
  };

  ensure_dir(ctx.path("eval/plots"));
  evaluate("vanilla", load_pretrained(ctx, nullptr));
  for (const std::string& m :
       {std::string("asap"), std::string("plain"), std::string("sysid"),
        std::string("delta_dynamics")}) {
    const std::string rel = "finetune/" + m + "/policy.ckpt";
    if (ctx.manifest.find("finetune_" + m) != nullptr) {
      verify_inputs(ctx.manifest, "finetune_" + m, {rel}, ctx.out);
      evaluate(m, load_checkpoint(ctx.path(rel)));
      inputs.push_back(rel);
    }
  }

  std::vector<double> noise_err;
  if (ctx.manifest.find("noise_finetune") != nullptr) {
    for (size_t i = 0; i < ctx.config.align.noise_betas.size(); ++i) {
      const std::string rel = beta_dir(i) + "/policy.ckpt";
      verify_inputs(ctx.manifest, "noise_finetune", {rel}, ctx.out);
      evaluate("noise_" + std::to_string(i), load_checkpoint(ctx.path(rel)));
      noise_err.push_back(evals.back().report.overall_e_g_mpjpe);
      inputs.push_back(rel);
    }
  }

  {
    std::ofstream os(ctx.path("eval/comparison.csv"));
    os << "# frames are control-rate frames (100 Hz default)\n";
    os << "method,success_rate,e_g_mpjpe_mm\n" << std::setprecision(17);
    for (const auto& me : evals)
      os << me.method << ',' << me.report.overall_success_rate << ','
         << me.report.overall_e_g_mpjpe << '\n';
    outputs.push_back("eval/comparison.csv");
  }

  if (!noise_err.empty()) {
    PlotSeries s{"noise fine-tune", ctx.config.align.noise_betas, noise_err};
    LinePlotOptions lopt;
    lopt.title = "Closed-loop error vs action-noise scale";
    lopt.x_label = "beta";
    lopt.y_label = "E_g_mpjpe (mm)";
    lopt.hlines.push_back({"no fine-tuning", evals[0].report.overall_e_g_mpjpe});
    write_line_plot(ctx.path("eval/plots/noise_sweep.svg"), {s}, lopt);
    outputs.push_back("eval/plots/noise_sweep.svg");
  }
  record_stage(ctx, "eval_closed", inputs, outputs);
}

void run_ablate(PipelineContext& ctx) {
  if (skip_if_done(ctx, "ablate")) return;
  verify_inputs(ctx.manifest, "collect",
                {"collect/train.traj", "collect/holdout.traj"}, ctx.out);
  const TrajectoryDataset train_ds =
      load_dataset(ctx.path("collect/train.traj"));
  const TrajectoryDataset holdout =
      load_dataset(ctx.path("collect/holdout.traj"));
  const MotionSet set = load_motion_set(ctx);
  Mlp critic;
  const GaussianPolicy pretrained = load_pretrained(ctx, &critic);
  const DynamicsParams real_params =
      apply_gap(ctx.config.dynamics, ctx.config.gap);

  OpenLoopConfig ocfg;
  ocfg.horizons_s = {ctx.config.align.horizon_s};
  ocfg.start_stride_s = ctx.config.eval.start_stride_s;
  ocfg.control_substeps = ctx.config.tracking.control_substeps;
  const double h_eval = ocfg.horizons_s[0];

  auto ood_error = [&](const DeltaActionModel& model) {
    const OpenLoopReport r =
        open_loop_eval(holdout, ctx.config.dynamics, Corrector::kDeltaAction,
                       &model, nullptr, nullptr, ocfg);
    return r.at(Corrector::kDeltaAction, h_eval).metrics.e_g_mpjpe;
  };

  ensure_dir(ctx.path("ablate"));

  // dataset-size sweep: open-loop error on out-of-distribution episodes
  {
    log_line(ctx, "ablate: dataset-size sweep");
    const std::vector<double> fracs = {0.1, 0.3, 1.0};
    std::vector<double> errs;
    for (double f : fracs) {
      DeltaTrainConfig dcfg = make_delta_config(ctx.config);
      dcfg.dataset_fraction = f;
      errs.push_back(ood_error(train_delta_action(
          train_ds, ctx.config.dynamics, dcfg, ctx.config.seed + 31, nullptr)));
    }
    std::ofstream os(ctx.path("ablate/dataset_size.csv"));
    os << "# frames are control-rate frames (100 Hz default)\n";
    os << "fraction,e_g_mpjpe_mm\n" << std::setprecision(17);
    for (size_t i = 0; i < fracs.size(); ++i)
      os << fracs[i] << ',' << errs[i] << '\n';
    LinePlotOptions lopt;
    lopt.title = "OOD open-loop error vs dataset size";
    lopt.x_label = "dataset fraction";
    lopt.y_label = "E_g_mpjpe (mm)";
    write_line_plot(ctx.path("ablate/dataset_size.svg"),
                    {{"delta action", fracs, errs}}, lopt);
  }

  // horizon sweep: open-loop and closed-loop
  {
    log_line(ctx, "ablate: training-horizon sweep");
    const std::vector<double> horizons = {0.25, 0.5, 1.0, 1.5};
    std::vector<double> open_errs, closed_errs;
    std::vector<const ReferenceMotion*> motions;
    for (const auto& m : set.motions) motions.push_back(&m);
    for (double h : horizons) {
      DeltaTrainConfig dcfg = make_delta_config(ctx.config);
      dcfg.horizon_s = h;
      const DeltaActionModel model = train_delta_action(
          train_ds, ctx.config.dynamics, dcfg, ctx.config.seed + 37, nullptr);
      open_errs.push_back(ood_error(model));
      const GaussianPolicy tuned = finetune_policy(
          pretrained, critic, ctx.config.dynamics, set.train_split(),
          make_delta_hook(model), make_finetune_config(ctx.config),
          ctx.config.seed + 41, nullptr);
      const ClosedLoopReport r = closed_loop_eval(
          tuned, real_params, motions, 1, ctx.config.seed + 43, {},
          ctx.config.tracking.control_substeps);
      closed_errs.push_back(r.overall_e_g_mpjpe);
    }
    std::ofstream os(ctx.path("ablate/horizon.csv"));
    os << "# frames are control-rate frames (100 Hz default)\n";
    os << "horizon_s,open_e_g_mpjpe_mm,closed_e_g_mpjpe_mm\n"
       << std::setprecision(17);
    for (size_t i = 0; i < horizons.size(); ++i)
      os << horizons[i] << ',' << open_errs[i] << ',' << closed_errs[i] << '\n';
    LinePlotOptions lopt;
    lopt.title = "Error vs training horizon";
    lopt.x_label = "horizon (s)";
    lopt.y_label = "E_g_mpjpe (mm)";
    write_line_plot(ctx.path("ablate/horizon.svg"),
                    {{"open-loop", horizons, open_errs},
                     {"closed-loop", horizons, closed_errs}},
                    lopt);
  }

  // action-norm weight sweep
  {
    log_line(ctx, "ablate: action-norm weight sweep");
    const std::vector<double> weights = {0.0, 0.05, 0.2, 1.0, 5.0};
    std::vector<double> errs;
    for (double w : weights) {
      DeltaTrainConfig dcfg = make_delta_config(ctx.config);
      dcfg.action_norm_weight = w;
      errs.push_back(ood_error(train_delta_action(
          train_ds, ctx.config.dynamics, dcfg, ctx.config.seed + 47, nullptr)));
    }
    std::ofstream os(ctx.path("ablate/action_norm.csv"));
    os << "# frames are control-rate frames (100 Hz default)\n";
    os << "weight,e_g_mpjpe_mm\n" << std::setprecision(17);
    for (size_t i = 0; i < weights.size(); ++i)
      os << weights[i] << ',' << errs[i] << '\n';
    LinePlotOptions lopt;
    lopt.title = "OOD open-loop error vs action-norm weight";
    lopt.x_label = "action-norm weight";
    lopt.y_label = "E_g_mpjpe (mm)";
    write_line_plot(ctx.path("ablate/action_norm.svg"),
                    {{"delta action", weights, errs}}, lopt);
  }

  record_stage(ctx, "ablate",
               {"collect/train.traj", "collect/holdout.traj"},
               {"ablate/dataset_size.csv", "ablate/dataset_size.svg",
                "ablate/horizon.csv", "ablate/horizon.svg",
                "ablate/action_norm.csv", "ablate/action_norm.svg"});
}

void run_full_pipeline(PipelineContext& ctx) {
  run_gen_motions(ctx);
  run_pretrain(ctx);
  run_collect(ctx);
  const std::string& method = ctx.config.align.method;
  if (method == "asap") {
    run_train_delta(ctx);
    run_finetune(ctx, "asap");
  } else if (method == "sysid") {
    run_sysid(ctx);
    run_finetune(ctx, "sysid");
  } else if (method == "delta_dynamics") {
    run_train_delta_dyn(ctx);
    run_finetune(ctx, "delta_dynamics");
  } else if (method == "noise") {
    run_noise_finetune(ctx);
  } else if (method == "all") {
    run_train_delta(ctx);
    run_train_delta_dyn(ctx);
    run_sysid(ctx);
    run_finetune(ctx, "asap");
    run_finetune(ctx, "sysid");
    run_finetune(ctx, "delta_dynamics");
  } else if (method == "vanilla" || method == "none") {
    // pretrained policy only
  } else {
    throw std::invalid_argument("unknown align method: " + method);
  }
  run_eval_open(ctx);
  run_eval_closed(ctx);
  log_line(ctx, "full pipeline complete");
}

}  // namespace dlalign
