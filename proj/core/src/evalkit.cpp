#include "dlalign/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dlalign/tracking.hpp"

namespace dlalign {

namespace {

double dist(Vec2 a, Vec2 b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

BodyTrajectory body_trajectory_from_states(
    const std::vector<std::vector<double>>& qs, const DynamicsParams& params) {
  BodyTrajectory out;
  out.reserve(qs.size());
  for (const auto& q : qs) out.push_back(forward_kinematics(q, params));
  return out;
}

}  // namespace

TrackingMetrics compute_metrics(const BodyTrajectory& sim_traj,
                                const BodyTrajectory& ref_traj,
                                double success_threshold) {
  if (sim_traj.size() != ref_traj.size())
    throw std::invalid_argument("trajectory length mismatch");
  TrackingMetrics m;
  if (sim_traj.empty()) return m;
  const size_t n_pts = sim_traj[0].size();
  if (n_pts == 0 || ref_traj[0].size() != n_pts)
    throw std::invalid_argument("body point count mismatch");
  const int root = root_point_index(static_cast<int>((n_pts - 1) / 2));

  double g_sum = 0.0, rel_sum = 0.0;
  for (size_t t = 0; t < sim_traj.size(); ++t) {
    double frame_mean = 0.0;
    for (size_t j = 0; j < n_pts; ++j) {
      const double d = dist(sim_traj[t][j], ref_traj[t][j]);
      g_sum += d;
      frame_mean += d;
      const Vec2 rel_sim = sim_traj[t][j] - sim_traj[t][root];
      const Vec2 rel_ref = ref_traj[t][j] - ref_traj[t][root];
      rel_sum += dist(rel_sim, rel_ref);
    }
    frame_mean /= static_cast<double>(n_pts);
    if (frame_mean > success_threshold) m.success = false;
  }
  const double count = static_cast<double>(sim_traj.size() * n_pts);
  m.e_g_mpjpe = 1000.0 * g_sum / count;
  m.e_mpjpe = 1000.0 * rel_sum / count;

  // acceleration: second differences of point positions, error of sim vs ref
  if (sim_traj.size() >= 3) {
    double acc_sum = 0.0;
    for (size_t t = 1; t + 1 < sim_traj.size(); ++t) {
      for (size_t j = 0; j < n_pts; ++j) {
        const Vec2 a_sim = (sim_traj[t + 1][j] - sim_traj[t][j]) -
                           (sim_traj[t][j] - sim_traj[t - 1][j]);
        const Vec2 a_ref = (ref_traj[t + 1][j] - ref_traj[t][j]) -
                           (ref_traj[t][j] - ref_traj[t - 1][j]);
        acc_sum += dist(a_sim, a_ref);
      }
    }
    m.e_acc = 1000.0 * acc_sum /
              (static_cast<double>(sim_traj.size() - 2) * n_pts);
  }
  // root velocity: first differences of the root point
  if (sim_traj.size() >= 2) {
    double vel_sum = 0.0;
    for (size_t t = 1; t < sim_traj.size(); ++t) {
      const Vec2 v_sim = sim_traj[t][root] - sim_traj[t - 1][root];
      const Vec2 v_ref = ref_traj[t][root] - ref_traj[t - 1][root];
      vel_sum += dist(v_sim, v_ref);
    }
    m.e_vel = 1000.0 * vel_sum / static_cast<double>(sim_traj.size() - 1);
  }
  return m;
}

std::string to_string(Corrector c) {
  switch (c) {
    case Corrector::kNone: return "none";
    case Corrector::kDeltaAction: return "delta_action";
    case Corrector::kDeltaDynamics: return "delta_dynamics";
    case Corrector::kSysIdParams: return "sysid";
  }
  return "none";
}

const OpenLoopEntry& OpenLoopReport::at(Corrector c, double horizon_s) const {
  for (const auto& e : entries)
    if (e.corrector == c && std::abs(e.horizon_s - horizon_s) < 1e-9) return e;
  throw std::invalid_argument("no open-loop entry for requested cell");
}

OpenLoopReport open_loop_eval(const TrajectoryDataset& dataset,
                              const DynamicsParams& sim_params,
                              Corrector corrector,
                              const DeltaActionModel* delta_action,
                              const DeltaDynamicsModel* delta_dynamics,
                              const DynamicsParams* sysid_params,
                              const OpenLoopConfig& config) {
  if (corrector == Corrector::kDeltaAction && delta_action == nullptr)
    throw std::invalid_argument("delta action corrector requires a model");
  if (corrector == Corrector::kDeltaDynamics && delta_dynamics == nullptr)
    throw std::invalid_argument("delta dynamics corrector requires a model");
  if (corrector == Corrector::kSysIdParams && sysid_params == nullptr)
    throw std::invalid_argument("sysid corrector requires parameters");

  const DynamicsParams& params =
      corrector == Corrector::kSysIdParams ? *sysid_params : sim_params;
  const int n = params.n_links;
  const int stride = std::max(
      1, static_cast<int>(std::round(config.start_stride_s / dataset.dt)));
  const double max_horizon =
      *std::max_element(config.horizons_s.begin(), config.horizons_s.end());
  const int max_steps =
      static_cast<int>(std::round(max_horizon / dataset.dt));

  // accumulate per horizon; every horizon shares the same start points
  struct Acc {
    double g = 0, rel = 0, acc = 0, vel = 0;
    int windows = 0;
    bool success = true;
  };
  std::vector<Acc> accs(config.horizons_s.size());

  for (const auto& ep : dataset.episodes) {
    for (int t0 = 0; t0 + max_steps <= ep.n_steps(); t0 += stride) {
      // roll the longest horizon once; shorter horizons are prefixes
      std::vector<std::vector<double>> sim_q{ep.q[t0]};
      SimState s = make_state(params, ep.q[t0], ep.qd[t0], ep.actions[t0]);
      for (int i = 0; i < max_steps; ++i) {
        const int t = t0 + i;
        if (corrector == Corrector::kDeltaAction) {
          std::vector<double> a = ep.actions[t];
          const std::vector<double> d =
              delta_action->correction(s.q, s.qd, ep.actions[t]);
          for (int j = 0; j < n; ++j) a[j] += d[j];
          Action act{a};
          for (int k = 0; k < config.control_substeps; ++k)
            s = step(s, act, params);
        } else if (corrector == Corrector::kDeltaDynamics) {
          s = step_with_residual(s, ep.actions[t], params, *delta_dynamics,
                                 config.control_substeps);
        } else {
          Action act{ep.actions[t]};
          for (int k = 0; k < config.control_substeps; ++k)
            s = step(s, act, params);
        }
        sim_q.push_back(s.q);
      }
      const BodyTrajectory sim_body =
          body_trajectory_from_states(sim_q, sim_params);
      std::vector<std::vector<double>> ref_q(
          ep.q.begin() + t0, ep.q.begin() + t0 + max_steps + 1);
      const BodyTrajectory ref_body =
          body_trajectory_from_states(ref_q, sim_params);

      for (size_t h = 0; h < config.horizons_s.size(); ++h) {
        const int steps =
            static_cast<int>(std::round(config.horizons_s[h] / dataset.dt));
        const BodyTrajectory sim_prefix(sim_body.begin(),
                                        sim_body.begin() + steps + 1);
        const BodyTrajectory ref_prefix(ref_body.begin(),
                                        ref_body.begin() + steps + 1);
        const TrackingMetrics m = compute_metrics(sim_prefix, ref_prefix);
        accs[h].g += m.e_g_mpjpe;
        accs[h].rel += m.e_mpjpe;
        accs[h].acc += m.e_acc;
        accs[h].vel += m.e_vel;
        accs[h].success = accs[h].success && m.success;
        accs[h].windows += 1;
      }
    }
  }

  OpenLoopReport report;
  for (size_t h = 0; h < config.horizons_s.size(); ++h) {
    OpenLoopEntry e;
    e.corrector = corrector;
    e.horizon_s = config.horizons_s[h];
    e.n_windows = accs[h].windows;
    if (accs[h].windows > 0) {
      e.metrics.e_g_mpjpe = accs[h].g / accs[h].windows;
      e.metrics.e_mpjpe = accs[h].rel / accs[h].windows;
      e.metrics.e_acc = accs[h].acc / accs[h].windows;
      e.metrics.e_vel = accs[h].vel / accs[h].windows;
      e.metrics.success = accs[h].success;
    }
    report.entries.push_back(e);
  }
  return report;
}

ClosedLoopReport closed_loop_eval(
    const GaussianPolicy& policy, const DynamicsParams& env_params,
    const std::vector<const ReferenceMotion*>& motions, int n_seeds,
    std::uint64_t base_seed, const ActionHook& hook, int control_substeps) {
  ClosedLoopReport report;
  for (const ReferenceMotion* motion : motions) {
    for (int seed = 0; seed < n_seeds; ++seed) {
      TrackingEnvOptions opt;
      opt.rsi = false;
      opt.terminate_on_error = false;
      opt.control_substeps = control_substeps;
      opt.fixed_motion = 0;
      opt.action_hook = hook;
      TrackingEnv env(env_params, {motion}, {}, {}, opt);
      Rng rng = make_rng(base_seed + static_cast<std::uint64_t>(seed) * 7919);
      env.reset(rng);

      BodyTrajectory sim_body{env.body_points()};
      BodyTrajectory ref_body{frame_at_phase(*motion, 0.0).body};
      std::vector<double> aobs, cobs;
      while (true) {
        env.observe(aobs, cobs);
        const std::vector<double> action = policy.mean(aobs);
        const Env::StepOutcome out = env.step(action, rng);
        sim_body.push_back(env.body_points());
        ref_body.push_back(frame_at_phase(*motion, env.phase()).body);
        if (out.done) break;
      }

      // truncate at the first failure frame
      size_t fail_at = sim_body.size();
      const size_t n_pts = sim_body[0].size();
      for (size_t t = 0; t < sim_body.size(); ++t) {
        double mean = 0.0;
        for (size_t j = 0; j < n_pts; ++j)
          mean += dist(sim_body[t][j], ref_body[t][j]);
        if (mean / static_cast<double>(n_pts) > 0.5) {
          fail_at = t + 1;
          break;
        }
      }
      const BodyTrajectory sim_cut(sim_body.begin(),
                                   sim_body.begin() + static_cast<long>(fail_at));
      const BodyTrajectory ref_cut(ref_body.begin(),
                                   ref_body.begin() + static_cast<long>(fail_at));

      ClosedLoopMotionResult run;
      run.motion_name = motion->name;
      run.difficulty = motion->difficulty;
      run.seed = seed;
      run.metrics = compute_metrics(sim_cut, ref_cut);
      if (fail_at < sim_body.size()) run.metrics.success = false;
      report.runs.push_back(std::move(run));
    }
  }

  // aggregate per difficulty
  const Difficulty kinds[] = {Difficulty::kEasy, Difficulty::kMedium,
                              Difficulty::kHard};
  double g_total = 0.0;
  int success_total = 0;
  for (Difficulty d : kinds) {
    ClosedLoopSummary s;
    s.difficulty = d;
    std::vector<double> g, rel, acc, vel;
    int successes = 0;
    for (const auto& run : report.runs) {
      if (run.difficulty != d) continue;
      g.push_back(run.metrics.e_g_mpjpe);
      rel.push_back(run.metrics.e_mpjpe);
      acc.push_back(run.metrics.e_acc);
      vel.push_back(run.metrics.e_vel);
      if (run.metrics.success) ++successes;
    }
    s.n_runs = static_cast<int>(g.size());
    if (s.n_runs == 0) continue;
    auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
      mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      sd = 0.0;
      for (double x : v) sd += (x - mean) * (x - mean);
      sd = std::sqrt(sd / static_cast<double>(v.size()));
    };
    mean_std(g, s.e_g_mpjpe_mean, s.e_g_mpjpe_std);
    mean_std(rel, s.e_mpjpe_mean, s.e_mpjpe_std);
    mean_std(acc, s.e_acc_mean, s.e_acc_std);
    mean_std(vel, s.e_vel_mean, s.e_vel_std);
    s.success_rate = static_cast<double>(successes) / s.n_runs;
    report.per_difficulty.push_back(s);
  }
  for (const auto& run : report.runs) {
    g_total += run.metrics.e_g_mpjpe;
    if (run.metrics.success) ++success_total;
  }
  if (!report.runs.empty()) {
    report.overall_e_g_mpjpe = g_total / static_cast<double>(report.runs.size());
    report.overall_success_rate =
        static_cast<double>(success_total) / static_cast<double>(report.runs.size());
  }
  return report;
}

void write_open_loop_csv(const OpenLoopReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# frames are control-rate frames (100 Hz default)\n";
  out << "method,horizon_s,e_g_mpjpe_mm,e_mpjpe_mm,e_acc_mm_per_frame2,"
         "e_vel_mm_per_frame,n_windows\n";
  out.precision(17);
  for (const auto& e : report.entries) {
    out << to_string(e.corrector) << ',' << e.horizon_s << ','
        << e.metrics.e_g_mpjpe << ',' << e.metrics.e_mpjpe << ','
        << e.metrics.e_acc << ',' << e.metrics.e_vel << ',' << e.n_windows
        << '\n';
  }
}

void write_closed_loop_csv(const ClosedLoopReport& report,
                           const std::string& path, const std::string& label) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# frames are control-rate frames (100 Hz default)\n";
  out << "method,difficulty,success_rate,e_g_mpjpe_mean,e_g_mpjpe_std,"
         "e_mpjpe_mean,e_mpjpe_std,e_acc_mean,e_acc_std,e_vel_mean,e_vel_std,"
         "n_runs\n";
  out.precision(17);
  for (const auto& s : report.per_difficulty) {
    out << label << ',' << to_string(s.difficulty) << ',' << s.success_rate
        << ',' << s.e_g_mpjpe_mean << ',' << s.e_g_mpjpe_std << ','
        << s.e_mpjpe_mean << ',' << s.e_mpjpe_std << ',' << s.e_acc_mean << ','
        << s.e_acc_std << ',' << s.e_vel_mean << ',' << s.e_vel_std << ','
        << s.n_runs << '\n';
  }
}

}  // namespace dlalign
