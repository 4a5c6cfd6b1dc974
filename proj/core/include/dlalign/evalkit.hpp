#pragma once

#include <map>
#include <string>
#include <vector>

#include "dlalign/align.hpp"
#include "dlalign/dynamics.hpp"
#include "dlalign/reference.hpp"

namespace dlalign {

struct TrackingMetrics {
  bool success = true;
  double e_g_mpjpe = 0.0;  // mm, global
  double e_mpjpe = 0.0;    // mm, root-relative
  double e_acc = 0.0;      // mm/frame^2
  double e_vel = 0.0;      // mm/frame
};

using BodyTrajectory = std::vector<std::vector<Vec2>>;  // [frame][point]

// Errors between two body-point trajectories at the control rate.
// Success fails if the mean point distance exceeds 0.5 m at any frame.
TrackingMetrics compute_metrics(const BodyTrajectory& sim_traj,
                                const BodyTrajectory& ref_traj,
                                double success_threshold = 0.5);

enum class Corrector { kNone, kDeltaAction, kDeltaDynamics, kSysIdParams };

std::string to_string(Corrector c);

struct OpenLoopConfig {
  std::vector<double> horizons_s = {0.25, 0.5, 1.0};
  double start_stride_s = 0.25;
  int control_substeps = 10;
};

struct OpenLoopEntry {
  Corrector corrector = Corrector::kNone;
  double horizon_s = 0.0;
  TrackingMetrics metrics;
  int n_windows = 0;
};

struct OpenLoopReport {
  std::vector<OpenLoopEntry> entries;

  const OpenLoopEntry& at(Corrector c, double horizon_s) const;
};

// Replays recorded action windows in the nominal simulator (optionally
// corrected) and scores divergence from the recorded trajectory.
OpenLoopReport open_loop_eval(const TrajectoryDataset& dataset,
                              const DynamicsParams& sim_params,
                              Corrector corrector,
                              const DeltaActionModel* delta_action,
                              const DeltaDynamicsModel* delta_dynamics,
                              const DynamicsParams* sysid_params,
                              const OpenLoopConfig& config = {});

struct ClosedLoopMotionResult {
  std::string motion_name;
  Difficulty difficulty = Difficulty::kEasy;
  std::uint64_t seed = 0;
  TrackingMetrics metrics;
};

struct ClosedLoopSummary {
  Difficulty difficulty = Difficulty::kEasy;
  double success_rate = 0.0;
  double e_g_mpjpe_mean = 0.0, e_g_mpjpe_std = 0.0;
  double e_mpjpe_mean = 0.0, e_mpjpe_std = 0.0;
  double e_acc_mean = 0.0, e_acc_std = 0.0;
  double e_vel_mean = 0.0, e_vel_std = 0.0;
  int n_runs = 0;
};

struct ClosedLoopReport {
  std::vector<ClosedLoopMotionResult> runs;
  std::vector<ClosedLoopSummary> per_difficulty;
  double overall_e_g_mpjpe = 0.0;
  double overall_success_rate = 0.0;
};

// Deterministic-mode rollouts from phase 0, optionally through an action
// hook (training-free correctors); metrics truncated at the first failure
// frame.
ClosedLoopReport closed_loop_eval(const GaussianPolicy& policy,
                                  const DynamicsParams& env_params,
                                  const std::vector<const ReferenceMotion*>& motions,
                                  int n_seeds, std::uint64_t base_seed = 0,
                                  const ActionHook& hook = {},
                                  int control_substeps = 10);

// CSV emission; every writer starts with a comment header noting that
// frames are control-rate frames.
void write_open_loop_csv(const OpenLoopReport& report, const std::string& path);
void write_closed_loop_csv(const ClosedLoopReport& report,
                           const std::string& path, const std::string& label);

}  // namespace dlalign
