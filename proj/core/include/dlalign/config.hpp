#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlalign/align.hpp"
#include "dlalign/dynamics.hpp"
#include "dlalign/ppo.hpp"
#include "dlalign/tracking.hpp"

namespace dlalign {

struct MotionConfig {
  int per_difficulty = 4;
  double amplitude_scale = 1.0;
};

struct TrackingConfig {
  RewardWeights weights;
  KernelScales kernels;
  CurriculumConfig curriculum;
  DomainRandomizationConfig dr;  // enabled during pretraining
  int control_substeps = 10;

  TrackingConfig() { dr.enabled = true; }
};

struct AlignConfig {
  std::string method = "asap";  // asap | sysid | delta_dynamics | noise | all
  int collect_episodes = 100;
  double horizon_s = 1.0;
  double action_norm_weight = 0.2;
  double delta_clamp = 0.25;
  std::vector<int> mask_joints;  // empty = all joints
  double dataset_fraction = 1.0;
  std::int64_t delta_total_steps = 400'000;
  std::int64_t finetune_total_steps = 300'000;
  std::vector<double> noise_betas = {0.025, 0.05, 0.1, 0.2, 0.4};
  int delta_dyn_iterations = 4000;
  int delta_dyn_k_end = 10;
};

struct EvalConfig {
  std::vector<double> open_loop_horizons_s = {0.25, 0.5, 1.0};
  double start_stride_s = 0.25;
  int n_seeds = 5;
};

struct IoConfig {
  std::string output_dir = "out";
};

// The full run description. Parsing rejects unknown keys; serialization
// echoes every defaulted value so runs are self-describing.
struct RunConfig {
  DynamicsParams dynamics = default_params(2);
  GapSpec gap = GapSpec::identity(2);
  MotionConfig motions;
  PpoConfig ppo;  // pretraining
  TrackingConfig tracking;
  AlignConfig align;
  EvalConfig eval;
  IoConfig io;
  std::uint64_t seed = 0;

  void validate() const;
};

// The "motor-weak" default gap: weak motors on joints 0-1, softer P gain,
// +10 ms control delay.
GapSpec motor_weak_gap(int n_links);

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& config);  // canonical, sorted keys
void save_config(const RunConfig& config, const std::string& path);

// FNV-1a hash of the canonical serialization.
std::uint64_t config_hash(const RunConfig& config);

}  // namespace dlalign
