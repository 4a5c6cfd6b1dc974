#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "dlalign/evalkit.hpp"

using namespace dlalign;

namespace {

ReferenceMotion constant_motion(const DynamicsParams& params,
                                const std::vector<double>& q, int frames,
                                const std::string& name = "const") {
  ReferenceMotion m;
  m.dt = 0.01;
  m.n_frames = frames;
  m.name = name;
  for (int t = 0; t < frames; ++t) {
    m.q_ref.push_back(q);
    m.qd_ref.push_back(std::vector<double>(q.size(), 0.0));
    m.body_ref.push_back(forward_kinematics(q, params));
  }
  return m;
}

GaussianPolicy zero_tracking_policy(int n_links, int history_len = 5) {
  GaussianPolicy pol;
  pol.mean_net = Mlp::zeros({{3 * n_links * history_len + 1, n_links},
                             Activation::kTanh});
  pol.log_std.assign(static_cast<size_t>(n_links), -2.0);
  return pol;
}

// static 5-point trajectory (two-link layout) at the given base position
BodyTrajectory static_traj(int frames, Vec2 base = {0.0, 0.0}) {
  BodyTrajectory out;
  std::vector<Vec2> pts;
  for (int j = 0; j < 5; ++j)
    pts.push_back(base + Vec2{0.1 * j, -0.2 * j});
  for (int t = 0; t < frames; ++t) out.push_back(pts);
  return out;
}

BodyTrajectory translate(const BodyTrajectory& traj, Vec2 d) {
  BodyTrajectory out = traj;
  for (auto& frame : out)
    for (auto& p : frame) p = p + d;
  return out;
}

// constant-output policy holding the given setpoint
GaussianPolicy hold_policy(const std::vector<double>& q, int history_len = 5) {
  const int n = static_cast<int>(q.size());
  GaussianPolicy pol = zero_tracking_policy(n, history_len);
  const int in_dim = 3 * n * history_len + 1;
  for (int i = 0; i < n; ++i)
    pol.mean_net.params[static_cast<size_t>(n * in_dim + i)] = q[static_cast<size_t>(i)];
  return pol;
}

TrajectoryDataset gapped_swing_dataset() {
  const DynamicsParams nominal = default_params(2);
  GapSpec gap = GapSpec::identity(2);
  gap.mass_ratio = 1.05;
  std::fill(gap.kp_ratio.begin(), gap.kp_ratio.end(), 0.925);
  const DynamicsParams real = apply_gap(nominal, gap);
  const ReferenceMotion m = constant_motion(nominal, {0.4, -0.3}, 301, "swing");
  const GaussianPolicy pol = hold_policy({0.4, -0.3});
  return collect_rollouts(pol, real, {&m}, 1, 11);
}

}  // namespace

TEST_CASE("compute_metrics: identical trajectories score zero everywhere") {
  const BodyTrajectory t = static_traj(10);
  const TrackingMetrics m = compute_metrics(t, t);
  CHECK(m.success);
  CHECK(m.e_g_mpjpe == 0.0);
  CHECK(m.e_mpjpe == 0.0);
  CHECK(m.e_acc == 0.0);
  CHECK(m.e_vel == 0.0);
}

TEST_CASE("compute_metrics: rigid translation hits only the global error") {
  const BodyTrajectory ref = static_traj(10);
  const double d = 0.04;  // 40 mm, below the success threshold
  const BodyTrajectory sim = translate(ref, {d, 0.0});
  const TrackingMetrics m = compute_metrics(sim, ref);
  CHECK(m.success);
  CHECK(m.e_g_mpjpe == doctest::Approx(1000.0 * d).epsilon(1e-12));
  CHECK(m.e_mpjpe == doctest::Approx(0.0));
  CHECK(m.e_acc == doctest::Approx(0.0));
  CHECK(m.e_vel == doctest::Approx(0.0));
}

TEST_CASE("compute_metrics: 0.6 m offset fails the success criterion") {
  const BodyTrajectory ref = static_traj(10);
  const BodyTrajectory sim = translate(ref, {0.6, 0.0});
  CHECK_FALSE(compute_metrics(sim, ref).success);
  // and exactly at the threshold it still passes
  const BodyTrajectory edge = translate(ref, {0.5, 0.0});
  CHECK(compute_metrics(edge, ref).success);
}

TEST_CASE("compute_metrics: error terms are symmetric in the arguments") {
  Rng rng = make_rng(21);
  BodyTrajectory a = static_traj(8), b = static_traj(8);
  for (auto& frame : a)
    for (auto& p : frame) p = p + Vec2{rng.uniform(-0.1, 0.1),
                                       rng.uniform(-0.1, 0.1)};
  const TrackingMetrics ab = compute_metrics(a, b);
  const TrackingMetrics ba = compute_metrics(b, a);
  CHECK(ab.e_g_mpjpe == doctest::Approx(ba.e_g_mpjpe).epsilon(1e-12));
  CHECK(ab.e_mpjpe == doctest::Approx(ba.e_mpjpe).epsilon(1e-12));
  CHECK(ab.e_acc == doctest::Approx(ba.e_acc).epsilon(1e-12));
  CHECK(ab.e_vel == doctest::Approx(ba.e_vel).epsilon(1e-12));
}

TEST_CASE("compute_metrics: linear drift gives e_vel, quadratic gives e_acc") {
  const int frames = 11;
  const BodyTrajectory ref = static_traj(frames);
  const double v = 0.003, c = 0.002;
  BodyTrajectory drift = ref, quad = ref;
  for (int t = 0; t < frames; ++t)
    for (auto& p : drift[static_cast<size_t>(t)]) p.x += v * t;
  for (int t = 0; t < frames; ++t)
    for (auto& p : quad[static_cast<size_t>(t)]) p.x += 0.5 * c * t * t;
  const TrackingMetrics md = compute_metrics(drift, ref);
  CHECK(md.e_vel == doctest::Approx(1000.0 * v).epsilon(1e-9));
  CHECK(md.e_acc == doctest::Approx(0.0));
  const TrackingMetrics mq = compute_metrics(quad, ref);
  // second difference of 0.5*c*t^2 is exactly c per frame^2
  CHECK(mq.e_acc == doctest::Approx(1000.0 * c).epsilon(1e-9));
}

TEST_CASE("compute_metrics: shape validation") {
  const BodyTrajectory a = static_traj(5), b = static_traj(6);
  CHECK_THROWS(compute_metrics(a, b));
  BodyTrajectory c = static_traj(5);
  c[0].pop_back();
  CHECK_THROWS(compute_metrics(c, static_traj(5)));
  const TrackingMetrics empty = compute_metrics({}, {});
  CHECK(empty.success);
  CHECK(empty.e_g_mpjpe == 0.0);
}

TEST_CASE("open_loop_eval: shorter horizons are exact prefixes") {
  const DynamicsParams nominal = default_params(2);
  const TrajectoryDataset ds = gapped_swing_dataset();
  OpenLoopConfig one;
  one.horizons_s = {1.0};
  OpenLoopConfig both;
  both.horizons_s = {0.25, 1.0};
  const OpenLoopReport ra = open_loop_eval(ds, nominal, Corrector::kNone,
                                           nullptr, nullptr, nullptr, one);
  const OpenLoopReport rb = open_loop_eval(ds, nominal, Corrector::kNone,
                                           nullptr, nullptr, nullptr, both);
  // window starts are fixed by the longest horizon, so the 1.0 s entry is
  // identical whether or not shorter horizons are requested alongside it
  const OpenLoopEntry& ea = ra.at(Corrector::kNone, 1.0);
  const OpenLoopEntry& eb = rb.at(Corrector::kNone, 1.0);
  CHECK(ea.n_windows > 0);
  CHECK(ea.n_windows == eb.n_windows);
  CHECK(ea.metrics.e_g_mpjpe == eb.metrics.e_g_mpjpe);
  CHECK(ea.metrics.e_mpjpe == eb.metrics.e_mpjpe);
  CHECK(ea.metrics.e_acc == eb.metrics.e_acc);
  CHECK(ea.metrics.e_vel == eb.metrics.e_vel);
  // the dynamics gap leaves a measurable error that grows with horizon
  const OpenLoopEntry& shorter = rb.at(Corrector::kNone, 0.25);
  CHECK(shorter.metrics.e_g_mpjpe > 0.0);
  CHECK(eb.metrics.e_g_mpjpe > shorter.metrics.e_g_mpjpe);
}

TEST_CASE("open_loop_eval: zero delta model matches the none corrector") {
  const DynamicsParams nominal = default_params(2);
  const TrajectoryDataset ds = gapped_swing_dataset();
  DeltaActionModel zero;
  zero.policy = zero_tracking_policy(2, 0);  // unused net shape
  zero.policy.mean_net = Mlp::zeros({{6, 2}, Activation::kTanh});
  const OpenLoopReport none = open_loop_eval(ds, nominal, Corrector::kNone,
                                             nullptr, nullptr, nullptr);
  const OpenLoopReport delta = open_loop_eval(
      ds, nominal, Corrector::kDeltaAction, &zero, nullptr, nullptr);
  for (double h : {0.25, 0.5, 1.0})
    CHECK(none.at(Corrector::kNone, h).metrics.e_g_mpjpe ==
          delta.at(Corrector::kDeltaAction, h).metrics.e_g_mpjpe);
}

TEST_CASE("open_loop_eval: replaying under the true parameters is exact") {
  const DynamicsParams nominal = default_params(2);
  GapSpec gap = GapSpec::identity(2);
  gap.mass_ratio = 1.05;
  std::fill(gap.kp_ratio.begin(), gap.kp_ratio.end(), 0.925);
  const DynamicsParams real = apply_gap(nominal, gap);
  const TrajectoryDataset ds = gapped_swing_dataset();
  const OpenLoopReport r = open_loop_eval(ds, nominal, Corrector::kSysIdParams,
                                          nullptr, nullptr, &real);
  for (double h : {0.25, 0.5, 1.0})
    CHECK(r.at(Corrector::kSysIdParams, h).metrics.e_g_mpjpe < 1e-9);
}

TEST_CASE("open_loop_eval: missing models rejected") {
  const DynamicsParams p = default_params(2);
  const TrajectoryDataset ds = gapped_swing_dataset();
  CHECK_THROWS(open_loop_eval(ds, p, Corrector::kDeltaAction, nullptr, nullptr,
                              nullptr));
  CHECK_THROWS(open_loop_eval(ds, p, Corrector::kDeltaDynamics, nullptr,
                              nullptr, nullptr));
  CHECK_THROWS(open_loop_eval(ds, p, Corrector::kSysIdParams, nullptr, nullptr,
                              nullptr));
}

TEST_CASE("closed_loop_eval: pinned equilibrium policy scores zero") {
  const DynamicsParams p = default_params(2);
  const ReferenceMotion m = constant_motion(p, {0.0, 0.0}, 101, "rest");
  const GaussianPolicy pol = zero_tracking_policy(2);
  const ClosedLoopReport r = closed_loop_eval(pol, p, {&m}, 3, 5);
  REQUIRE(r.runs.size() == 3);
  CHECK(r.overall_success_rate == 1.0);
  CHECK(r.overall_e_g_mpjpe < 1e-9);
  REQUIRE(r.per_difficulty.size() == 1);
  CHECK(r.per_difficulty[0].n_runs == 3);
  CHECK(r.per_difficulty[0].success_rate == 1.0);
}

TEST_CASE("closed_loop_eval: deterministic under a fixed base seed") {
  const DynamicsParams p = default_params(2);
  const ReferenceMotion m = constant_motion(p, {0.3, -0.2}, 101, "hold");
  const GaussianPolicy pol = zero_tracking_policy(2);
  const ClosedLoopReport a = closed_loop_eval(pol, p, {&m}, 2, 42);
  const ClosedLoopReport b = closed_loop_eval(pol, p, {&m}, 2, 42);
  REQUIRE(a.runs.size() == b.runs.size());
  for (size_t i = 0; i < a.runs.size(); ++i) {
    CHECK(a.runs[i].metrics.e_g_mpjpe == b.runs[i].metrics.e_g_mpjpe);
    CHECK(a.runs[i].metrics.e_vel == b.runs[i].metrics.e_vel);
  }
}

TEST_CASE("csv writers emit the control-rate frame header") {
  const BodyTrajectory t = static_traj(5);
  OpenLoopReport olr;
  OpenLoopEntry e;
  e.metrics = compute_metrics(t, t);
  olr.entries.push_back(e);
  const std::string p1 = "/tmp/dlalign_test_open.csv";
  write_open_loop_csv(olr, p1);
  std::ifstream in1(p1);
  std::string line;
  std::getline(in1, line);
  CHECK(line == "# frames are control-rate frames (100 Hz default)");

  const DynamicsParams p = default_params(2);
  const ReferenceMotion m = constant_motion(p, {0.0, 0.0}, 51, "rest");
  const GaussianPolicy pol = zero_tracking_policy(2);
  const ClosedLoopReport clr = closed_loop_eval(pol, p, {&m}, 1, 0);
  const std::string p2 = "/tmp/dlalign_test_closed.csv";
  write_closed_loop_csv(clr, p2, "vanilla");
  std::ifstream in2(p2);
  std::getline(in2, line);
  CHECK(line == "# frames are control-rate frames (100 Hz default)");
  std::getline(in2, line);  // column header
  std::getline(in2, line);
  CHECK(line.substr(0, 8) == "vanilla,");
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}
