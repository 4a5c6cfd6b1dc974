#include "dlalign/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dlalign/binio.hpp"

namespace dlalign {

namespace {

constexpr double kControlDt = 0.01;
constexpr char kMotionMagic[] = "DLALIGN-MOT/1\n";

void fill_body_ref(ReferenceMotion& m, const DynamicsParams& params) {
  m.body_ref.resize(m.q_ref.size());
  for (size_t t = 0; t < m.q_ref.size(); ++t)
    m.body_ref[t] = forward_kinematics(m.q_ref[t], params);
}

// minimum-jerk time profile and its derivative
double min_jerk(double x) { return x * x * x * (10.0 - 15.0 * x + 6.0 * x * x); }
double min_jerk_d(double x) { return 30.0 * x * x * (1.0 - 2.0 * x + x * x); }

}  // namespace

std::string to_string(Difficulty d) {
  switch (d) {
    case Difficulty::kEasy: return "easy";
    case Difficulty::kMedium: return "medium";
    case Difficulty::kHard: return "hard";
  }
  return "easy";
}

Difficulty difficulty_from_string(const std::string& s) {
  if (s == "easy") return Difficulty::kEasy;
  if (s == "medium") return Difficulty::kMedium;
  if (s == "hard") return Difficulty::kHard;
  throw std::invalid_argument("unknown difficulty: " + s);
}

const ReferenceMotion& MotionSet::by_name(const std::string& name) const {
  for (const auto& m : motions)
    if (m.name == name) return m;
  throw std::invalid_argument("no motion named " + name);
}

std::vector<const ReferenceMotion*> MotionSet::train_split() const {
  std::vector<const ReferenceMotion*> out;
  for (const auto& n : train_names) out.push_back(&by_name(n));
  return out;
}

std::vector<const ReferenceMotion*> MotionSet::holdout_split() const {
  std::vector<const ReferenceMotion*> out;
  for (const auto& n : holdout_names) out.push_back(&by_name(n));
  return out;
}

ReferenceMotion generate_synthetic(Difficulty kind, std::uint64_t seed,
                                   const DynamicsParams& params,
                                   double amplitude_scale) {
  const int n = params.n_links;
  Rng rng = make_rng(seed);
  ReferenceMotion m;
  m.dt = kControlDt;
  m.difficulty = kind;

  if (kind == Difficulty::kHard) {
    // rest-to-rest minimum-jerk swings through random waypoints
    const int n_segments = static_cast<int>(rng.uniform_int(3, 4));
    std::vector<double> seg_dur(n_segments);
    std::vector<std::vector<double>> waypoints(n_segments + 1,
                                               std::vector<double>(n, 0.0));
    for (int s = 0; s < n_segments; ++s) seg_dur[s] = rng.uniform(0.9, 1.3);
    for (int s = 1; s <= n_segments; ++s)
      for (int i = 0; i < n; ++i)
        waypoints[s][i] = amplitude_scale * rng.uniform(-0.9, 0.9);

    double total = 0.0;
    for (double d : seg_dur) total += d;
    m.n_frames = static_cast<int>(std::round(total / m.dt)) + 1;
    // snap durations to the frame grid so the final frame sits exactly at
    // rest (x = 1 in the last segment)
    const double snap = (m.n_frames - 1) * m.dt / total;
    for (double& d : seg_dur) d *= snap;
    total = (m.n_frames - 1) * m.dt;
    m.q_ref.resize(m.n_frames, std::vector<double>(n));
    m.qd_ref.resize(m.n_frames, std::vector<double>(n));
    for (int t = 0; t < m.n_frames; ++t) {
      double time = std::min(t * m.dt, total);
      int s = 0;
      while (s < n_segments - 1 && time > seg_dur[s]) {
        time -= seg_dur[s];
        ++s;
      }
      const double x = std::clamp(time / seg_dur[s], 0.0, 1.0);
      for (int i = 0; i < n; ++i) {
        const double delta = waypoints[s + 1][i] - waypoints[s][i];
        m.q_ref[t][i] = waypoints[s][i] + delta * min_jerk(x);
        m.qd_ref[t][i] = delta * min_jerk_d(x) / seg_dur[s];
      }
    }
  } else {
    const bool easy = kind == Difficulty::kEasy;
    const double duration = rng.uniform(2.0, easy ? 4.0 : 5.0);
    m.n_frames = static_cast<int>(std::round(duration / m.dt)) + 1;
    const double total = (m.n_frames - 1) * m.dt;
    const int n_harmonics = easy ? 1 : 3;
    // integer cycle counts keep the endpoints periodic
    std::vector<std::vector<double>> amp(n, std::vector<double>(n_harmonics));
    std::vector<std::vector<double>> freq(n, std::vector<double>(n_harmonics));
    std::vector<std::vector<double>> phase(n, std::vector<double>(n_harmonics));
    for (int i = 0; i < n; ++i) {
      const int base_cycles = static_cast<int>(
          rng.uniform_int(1, easy ? std::max(1, static_cast<int>(total / 2.0))
                                  : std::max(1, static_cast<int>(total))));
      for (int h = 0; h < n_harmonics; ++h) {
        const double base_amp = easy ? rng.uniform(0.1, 0.25)
                                     : rng.uniform(0.15, 0.3) / (h + 1);
        amp[i][h] = amplitude_scale * base_amp;
        freq[i][h] = 2.0 * M_PI * base_cycles * (h + 1) / total;
        phase[i][h] = easy ? 0.0 : rng.uniform(0.0, 2.0 * M_PI);
      }
    }
    m.q_ref.resize(m.n_frames, std::vector<double>(n));
    m.qd_ref.resize(m.n_frames, std::vector<double>(n));
    for (int t = 0; t < m.n_frames; ++t) {
      const double time = t * m.dt;
      for (int i = 0; i < n; ++i) {
        double q = 0.0, qd = 0.0;
        for (int h = 0; h < n_harmonics; ++h) {
          q += amp[i][h] * std::sin(freq[i][h] * time + phase[i][h]);
          qd += amp[i][h] * freq[i][h] * std::cos(freq[i][h] * time + phase[i][h]);
        }
        m.q_ref[t][i] = q;
        m.qd_ref[t][i] = qd;
      }
    }
  }

  fill_body_ref(m, params);
  m.name = to_string(kind) + "_" + std::to_string(seed);
  return m;
}

FeasibilityReport feasibility_clean(const ReferenceMotion& motion,
                                    const DynamicsParams& params) {
  const int n = params.n_links;
  if (motion.n_links() != n)
    throw std::invalid_argument("motion/params dimension mismatch");
  FeasibilityReport rep;
  rep.peak_torque.assign(n, 0.0);
  for (int t = 0; t < motion.n_frames; ++t) {
    // accelerations from central differences of the analytic velocities
    std::vector<double> qdd(n, 0.0);
    if (motion.n_frames >= 2) {
      const int lo = std::max(0, t - 1);
      const int hi = std::min(motion.n_frames - 1, t + 1);
      for (int i = 0; i < n; ++i)
        qdd[i] = (motion.qd_ref[hi][i] - motion.qd_ref[lo][i]) /
                 ((hi - lo) * motion.dt);
    }
    std::vector<double> tau =
        inverse_dynamics(motion.q_ref[t], motion.qd_ref[t], qdd, params, true);
    for (int i = 0; i < n; ++i) {
      tau[i] += params.joint_damping[i] * motion.qd_ref[t][i];
      rep.peak_torque[i] = std::max(rep.peak_torque[i], std::abs(tau[i]));
    }
  }
  rep.accepted = true;
  for (int i = 0; i < n; ++i)
    if (rep.peak_torque[i] > params.torque_limit[i]) rep.accepted = false;
  return rep;
}

MotionFrame frame_at_phase(const ReferenceMotion& motion, double phase) {
  if (!(phase >= 0.0 && phase <= 1.0))
    throw std::invalid_argument("phase must be in [0, 1]");
  const int last = motion.n_frames - 1;
  const double x = phase * last;
  const int lo = std::min(static_cast<int>(x), last);
  const int hi = std::min(lo + 1, last);
  const double a = x - lo;
  const int n = motion.n_links();
  MotionFrame f;
  f.q.resize(n);
  f.qd.resize(n);
  for (int i = 0; i < n; ++i) {
    f.q[i] = (1.0 - a) * motion.q_ref[lo][i] + a * motion.q_ref[hi][i];
    f.qd[i] = (1.0 - a) * motion.qd_ref[lo][i] + a * motion.qd_ref[hi][i];
  }
  const auto& blo = motion.body_ref[lo];
  const auto& bhi = motion.body_ref[hi];
  f.body.resize(blo.size());
  for (size_t j = 0; j < blo.size(); ++j)
    f.body[j] = (1.0 - a) * blo[j] + a * bhi[j];
  return f;
}

MotionSet default_motion_set(std::uint64_t seed, const DynamicsParams& params,
                             int per_difficulty, double amplitude_scale) {
  MotionSet set;
  const Difficulty kinds[] = {Difficulty::kEasy, Difficulty::kMedium,
                              Difficulty::kHard};
  for (const Difficulty kind : kinds) {
    for (int j = 0; j < per_difficulty; ++j) {
      // deterministic retry until the motion passes cleaning
      for (std::uint64_t attempt = 0;; ++attempt) {
        const std::uint64_t s =
            seed * 1000003ULL + static_cast<std::uint64_t>(kind) * 4099ULL +
            static_cast<std::uint64_t>(j) * 101ULL + attempt;
        ReferenceMotion m = generate_synthetic(kind, s, params, amplitude_scale);
        if (feasibility_clean(m, params).accepted) {
          m.name = to_string(kind) + "_" + std::to_string(j);
          // the last motion of each difficulty is held out
          if (j == per_difficulty - 1 && per_difficulty > 1)
            set.holdout_names.push_back(m.name);
          else
            set.train_names.push_back(m.name);
          set.motions.push_back(std::move(m));
          break;
        }
        if (attempt > 1000)
          throw std::runtime_error("motion generator failed to satisfy cleaning");
      }
    }
  }
  return set;
}

void save_motion(const ReferenceMotion& motion, const std::string& path) {
  BinWriter w(path);
  w.magic(kMotionMagic);
  w.f64(motion.dt);
  w.u32(static_cast<std::uint32_t>(motion.n_links()));
  w.u32(static_cast<std::uint32_t>(motion.n_frames));
  w.u8(static_cast<std::uint8_t>(motion.difficulty));
  w.str(motion.name);
  for (int t = 0; t < motion.n_frames; ++t) {
    w.f64s(motion.q_ref[t]);
    w.f64s(motion.qd_ref[t]);
    for (const Vec2& p : motion.body_ref[t]) {
      w.f64(p.x);
      w.f64(p.y);
    }
  }
  w.close();
}

ReferenceMotion load_motion(const std::string& path) {
  BinReader r(path);
  r.magic(kMotionMagic);
  ReferenceMotion m;
  m.dt = r.f64();
  const int n = static_cast<int>(r.u32());
  m.n_frames = static_cast<int>(r.u32());
  m.difficulty = static_cast<Difficulty>(r.u8());
  m.name = r.str();
  m.q_ref.resize(m.n_frames);
  m.qd_ref.resize(m.n_frames);
  m.body_ref.resize(m.n_frames);
  const int n_pts = body_point_count(n);
  for (int t = 0; t < m.n_frames; ++t) {
    m.q_ref[t] = r.f64s(n);
    m.qd_ref[t] = r.f64s(n);
    m.body_ref[t].resize(n_pts);
    for (int j = 0; j < n_pts; ++j) {
      m.body_ref[t][j].x = r.f64();
      m.body_ref[t][j].y = r.f64();
    }
  }
  return m;
}

}  // namespace dlalign
