#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "dlalign/reference.hpp"

using namespace dlalign;

namespace {
const double kPi = 3.14159265358979323846;

ReferenceMotion constant_motion(const DynamicsParams& params,
                                const std::vector<double>& q, int frames) {
  ReferenceMotion m;
  m.dt = 0.01;
  m.n_frames = frames;
  m.name = "const";
  for (int t = 0; t < frames; ++t) {
    m.q_ref.push_back(q);
    m.qd_ref.push_back(std::vector<double>(q.size(), 0.0));
    m.body_ref.push_back(forward_kinematics(q, params));
  }
  return m;
}
}  // namespace

TEST_CASE("generate_synthetic: zero amplitude gives a constant motion") {
  const DynamicsParams p = default_params(2);
  const ReferenceMotion m = generate_synthetic(Difficulty::kEasy, 3, p, 0.0);
  REQUIRE(m.n_frames >= 2);
  for (int t = 0; t < m.n_frames; ++t)
    for (int i = 0; i < 2; ++i) {
      CHECK(m.q_ref[t][i] == doctest::Approx(m.q_ref[0][i]).epsilon(1e-12));
      CHECK(m.qd_ref[t][i] == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("generate_synthetic: hard motions start and end at rest") {
  // only the hard (min-jerk rest-to-rest) motions pin endpoint velocities
  const DynamicsParams p = default_params(2);
  const ReferenceMotion m = generate_synthetic(Difficulty::kHard, 11, p);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(m.qd_ref.front()[i]) < 1e-9);
    CHECK(std::abs(m.qd_ref.back()[i]) < 1e-9);
  }
}

TEST_CASE("generate_synthetic: seed-deterministic, seed-sensitive") {
  const DynamicsParams p = default_params(2);
  const ReferenceMotion a = generate_synthetic(Difficulty::kMedium, 5, p);
  const ReferenceMotion b = generate_synthetic(Difficulty::kMedium, 5, p);
  const ReferenceMotion c = generate_synthetic(Difficulty::kMedium, 6, p);
  CHECK(a.q_ref == b.q_ref);
  CHECK(a.q_ref != c.q_ref);
}

TEST_CASE("generate_synthetic: qd_ref consistent with finite differences") {
  // analytic generation: central differences agree to O(dt^2)
  const DynamicsParams p = default_params(2);
  for (auto kind : {Difficulty::kEasy, Difficulty::kMedium, Difficulty::kHard}) {
    const ReferenceMotion m = generate_synthetic(kind, 2, p);
    double worst = 0.0;
    for (int t = 1; t + 1 < m.n_frames; ++t)
      for (int i = 0; i < 2; ++i) {
        const double fd =
            (m.q_ref[t + 1][i] - m.q_ref[t - 1][i]) / (2.0 * m.dt);
        worst = std::max(worst, std::abs(fd - m.qd_ref[t][i]));
      }
    CHECK(worst < 5e-3);  // O(dt^2) truncation at dt = 0.01
  }
}

TEST_CASE("feasibility_clean: rest at equilibrium accepts with zero torque") {
  const DynamicsParams p = default_params(2);
  const ReferenceMotion m = constant_motion(p, {0.0, 0.0}, 10);
  const FeasibilityReport r = feasibility_clean(m, p);
  CHECK(r.accepted);
  for (double tau : r.peak_torque) CHECK(tau < 1e-9);
}

TEST_CASE("feasibility_clean: horizontal point-mass link needs m*g*L") {
  DynamicsParams p = default_params(1);
  const double m = 1.3, L = 0.8;
  p.link_mass = {m};
  p.link_length = {L};
  p.com_offset = {L / 2.0};
  p.joint_damping = {0.0};
  p.torque_limit = {100.0};
  const ReferenceMotion motion = constant_motion(p, {kPi / 2.0}, 10);
  const FeasibilityReport r = feasibility_clean(motion, p);
  CHECK(r.accepted);
  CHECK(r.peak_torque[0] == doctest::Approx(m * p.gravity * L).epsilon(1e-9));
}

TEST_CASE("feasibility_clean: hard motion fails under 1% torque limits") {
  DynamicsParams p = default_params(2);
  const ReferenceMotion m = generate_synthetic(Difficulty::kHard, 17, p);
  for (auto& lim : p.torque_limit) lim *= 0.01;
  CHECK_FALSE(feasibility_clean(m, p).accepted);
}

TEST_CASE("default_motion_set: all motions pass cleaning under nominal params") {
  const DynamicsParams p = default_params(2);
  const MotionSet set = default_motion_set(7, p);
  CHECK(set.motions.size() == 12);
  CHECK(set.holdout_names.size() == 3);
  CHECK(set.train_names.size() == 9);
  for (const auto& m : set.motions) {
    CHECK(feasibility_clean(m, p).accepted);
    CHECK(m.duration() >= 2.0 - 1e-9);
    CHECK(m.duration() <= 5.0 + 1e-9);
  }
  // names unique
  for (size_t i = 0; i < set.motions.size(); ++i)
    for (size_t j = i + 1; j < set.motions.size(); ++j)
      CHECK(set.motions[i].name != set.motions[j].name);
}

TEST_CASE("frame_at_phase: endpoints exact, midpoint on grid") {
  const DynamicsParams p = default_params(2);
  ReferenceMotion m = constant_motion(p, {0.1, 0.2}, 3);
  m.q_ref[0] = {0.0, 0.0};
  m.q_ref[1] = {0.5, 1.0};
  m.q_ref[2] = {1.0, 2.0};
  CHECK(frame_at_phase(m, 0.0).q == m.q_ref[0]);
  CHECK(frame_at_phase(m, 1.0).q == m.q_ref[2]);
  const MotionFrame mid = frame_at_phase(m, 0.5);  // exactly frame 1
  CHECK(mid.q[0] == doctest::Approx(0.5));
  CHECK(mid.q[1] == doctest::Approx(1.0));
  CHECK_THROWS(frame_at_phase(m, -0.01));
  CHECK_THROWS(frame_at_phase(m, 1.01));
}

TEST_CASE("frame_at_phase: continuity in phase") {
  const DynamicsParams p = default_params(2);
  const ReferenceMotion m = generate_synthetic(Difficulty::kMedium, 23, p);
  const double eps = 1e-7;
  for (double phi : {0.1, 0.37, 0.5, 0.9}) {
    const MotionFrame a = frame_at_phase(m, phi);
    const MotionFrame b = frame_at_phase(m, phi + eps);
    for (int i = 0; i < 2; ++i)
      CHECK(std::abs(a.q[i] - b.q[i]) < 1e-4);
  }
}

TEST_CASE("motion file round-trips bit-exactly") {
  const DynamicsParams p = default_params(2);
  const ReferenceMotion m = generate_synthetic(Difficulty::kHard, 29, p);
  const std::string path = "/tmp/dlalign_test_motion.mot";
  save_motion(m, path);
  const ReferenceMotion back = load_motion(path);
  CHECK(back.q_ref == m.q_ref);
  CHECK(back.qd_ref == m.qd_ref);
  CHECK(back.n_frames == m.n_frames);
  CHECK(back.dt == m.dt);
  CHECK(back.name == m.name);
  CHECK(back.difficulty == m.difficulty);
  REQUIRE(back.body_ref.size() == m.body_ref.size());
  for (size_t t = 0; t < m.body_ref.size(); ++t)
    for (size_t j = 0; j < m.body_ref[t].size(); ++j) {
      CHECK(back.body_ref[t][j].x == m.body_ref[t][j].x);
      CHECK(back.body_ref[t][j].y == m.body_ref[t][j].y);
    }
  std::remove(path.c_str());
}
