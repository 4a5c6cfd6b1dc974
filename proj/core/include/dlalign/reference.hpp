#pragma once

#include <string>
#include <vector>

#include "dlalign/dynamics.hpp"
#include "dlalign/rng.hpp"

namespace dlalign {

enum class Difficulty { kEasy, kMedium, kHard };

std::string to_string(Difficulty d);
Difficulty difficulty_from_string(const std::string& s);

struct MotionFrame {
  std::vector<double> q;
  std::vector<double> qd;
  std::vector<Vec2> body;  // forward_kinematics layout
};

struct ReferenceMotion {
  double dt = 0.01;  // s, per frame (control rate)
  int n_frames = 0;
  std::vector<std::vector<double>> q_ref;   // [frame][joint]
  std::vector<std::vector<double>> qd_ref;  // [frame][joint]
  std::vector<std::vector<Vec2>> body_ref;  // [frame][point]
  Difficulty difficulty = Difficulty::kEasy;
  std::string name;

  double duration() const { return (n_frames - 1) * dt; }
  int n_links() const { return q_ref.empty() ? 0 : static_cast<int>(q_ref[0].size()); }
};

struct MotionSet {
  std::vector<ReferenceMotion> motions;
  std::vector<std::string> train_names;
  std::vector<std::string> holdout_names;

  const ReferenceMotion& by_name(const std::string& name) const;
  std::vector<const ReferenceMotion*> train_split() const;
  std::vector<const ReferenceMotion*> holdout_split() const;
};

// Synthetic reference motions in place of retargeted video data.
//  easy:   single-harmonic small-amplitude sinusoids (integer cycles)
//  medium: multi-harmonic sinusoids with per-joint phase offsets
//  hard:   rest-to-rest minimum-jerk swings between distant waypoints
ReferenceMotion generate_synthetic(Difficulty kind, std::uint64_t seed,
                                   const DynamicsParams& params,
                                   double amplitude_scale = 1.0);

struct FeasibilityReport {
  bool accepted = false;
  std::vector<double> peak_torque;  // per joint, N*m
};

// Inverse-dynamics torque feasibility along the reference.
FeasibilityReport feasibility_clean(const ReferenceMotion& motion,
                                    const DynamicsParams& params);

// Linear interpolation at phase in [0, 1]; throws outside the range.
MotionFrame frame_at_phase(const ReferenceMotion& motion, double phase);

// Default benchmark: 4 motions per difficulty, one of each held out.
MotionSet default_motion_set(std::uint64_t seed, const DynamicsParams& params,
                             int per_difficulty = 4,
                             double amplitude_scale = 1.0);

// Versioned binary file, magic "DLALIGN-MOT/1", little-endian f64 payload.
void save_motion(const ReferenceMotion& motion, const std::string& path);
ReferenceMotion load_motion(const std::string& path);

}  // namespace dlalign
