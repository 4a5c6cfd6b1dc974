#include "dlalign/dynamics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dlalign {

namespace {

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// unit vector along a link whose joint angle is measured from the downward
// vertical
Vec2 link_dir(double theta) { return {std::sin(theta), -std::cos(theta)}; }
Vec2 link_dir_d(double theta) { return {std::cos(theta), std::sin(theta)}; }

double cross2(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

double com_radius(const DynamicsParams& p, int i) {
  return 0.5 * p.link_length[i] + p.com_offset[i];
}

double rot_inertia(const DynamicsParams& p, int i) {
  return p.link_mass[i] * p.link_length[i] * p.link_length[i] / 12.0;
}

}  // namespace

void DynamicsParams::validate() const {
  require(n_links >= 1 && n_links <= 4, "n_links must be in [1, 4]");
  const auto n = static_cast<size_t>(n_links);
  require(link_mass.size() == n && link_length.size() == n &&
              com_offset.size() == n && joint_damping.size() == n &&
              pd_kp.size() == n && pd_kd.size() == n &&
              torque_limit.size() == n && motor_strength.size() == n,
          "per-link parameter arrays must have n_links entries");
  for (size_t i = 0; i < n; ++i) {
    require(link_mass[i] > 0.0, "link_mass must be > 0");
    require(link_length[i] > 0.0, "link_length must be > 0");
    require(std::abs(com_offset[i]) <= 0.5 * link_length[i],
            "|com_offset| must be <= link_length/2");
    require(joint_damping[i] >= 0.0, "joint_damping must be >= 0");
    require(torque_limit[i] >= 0.0, "torque_limit must be >= 0");
    require(motor_strength[i] >= 0.0, "motor_strength must be >= 0");
  }
  require(control_delay_steps >= 0, "control_delay_steps must be >= 0");
  require(dt > 0.0, "dt must be > 0");
}

DynamicsParams default_params(int n_links) {
  DynamicsParams p;
  p.n_links = n_links;
  const auto n = static_cast<size_t>(n_links);
  // slow enough that semi-implicit Euler at dt=1e-3 keeps passive energy
  // within 1% over seconds-long swings
  const double total_length = 2.0;
  p.link_mass.assign(n, 1.0);
  p.link_length.assign(n, total_length / n_links);
  p.com_offset.assign(n, 0.0);
  p.joint_damping.assign(n, 0.1);
  p.pd_kp.assign(n, 100.0);
  p.pd_kd.assign(n, 5.0);
  p.torque_limit.assign(n, 30.0);
  p.motor_strength.assign(n, 1.0);
  p.control_delay_steps = 0;
  p.dt = 1e-3;
  p.validate();
  return p;
}

SimState make_state(const DynamicsParams& params, std::vector<double> q,
                    std::vector<double> qd, const std::vector<double>& hold) {
  SimState s;
  s.q = std::move(q);
  s.qd = std::move(qd);
  s.t = 0.0;
  for (int i = 0; i < params.control_delay_steps; ++i)
    s.delay_buffer.push_back(hold);
  return s;
}

GapSpec GapSpec::identity(int n_links) {
  GapSpec g;
  const auto n = static_cast<size_t>(n_links);
  g.kp_ratio.assign(n, 1.0);
  g.kd_ratio.assign(n, 1.0);
  g.motor_strength_ratio.assign(n, 1.0);
  return g;
}

bool GapSpec::is_identity() const {
  auto all_one = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 1.0; });
  };
  return mass_ratio == 1.0 && com_shift == 0.0 && extra_delay_steps == 0 &&
         extra_damping == 0.0 && all_one(kp_ratio) && all_one(kd_ratio) &&
         all_one(motor_strength_ratio);
}

DynamicsParams apply_gap(const DynamicsParams& params, const GapSpec& gap) {
  require(gap.mass_ratio > 0.0, "mass_ratio must be > 0");
  const auto n = static_cast<size_t>(params.n_links);
  require(gap.kp_ratio.size() == n && gap.kd_ratio.size() == n &&
              gap.motor_strength_ratio.size() == n,
          "gap ratio arrays must have n_links entries");
  DynamicsParams out = params;
  for (size_t i = 0; i < n; ++i) {
    require(gap.kp_ratio[i] > 0.0 && gap.kd_ratio[i] > 0.0 &&
                gap.motor_strength_ratio[i] > 0.0,
            "gap ratios must be > 0");
    out.link_mass[i] *= gap.mass_ratio;
    out.com_offset[i] += gap.com_shift;
    out.pd_kp[i] *= gap.kp_ratio[i];
    out.pd_kd[i] *= gap.kd_ratio[i];
    out.motor_strength[i] *= gap.motor_strength_ratio[i];
    out.joint_damping[i] += gap.extra_damping;
  }
  out.control_delay_steps += gap.extra_delay_steps;
  out.validate();
  return out;
}

std::vector<double> inverse_dynamics(const std::vector<double>& q,
                                     const std::vector<double>& qd,
                                     const std::vector<double>& qdd,
                                     const DynamicsParams& params,
                                     bool with_gravity) {
  const int n = params.n_links;
  std::vector<double> theta(n), omega(n), alpha(n);
  double th = 0.0, om = 0.0, al = 0.0;
  for (int i = 0; i < n; ++i) {
    th += q[i];
    om += qd[i];
    al += qdd[i];
    theta[i] = th;
    omega[i] = om;
    alpha[i] = al;
  }

  // forward pass: joint origins and accelerations, COM accelerations
  std::vector<Vec2> o(n + 1), o_acc(n + 1), com(n), com_acc(n);
  o[0] = {0.0, 0.0};
  o_acc[0] = {0.0, 0.0};
  for (int i = 0; i < n; ++i) {
    const Vec2 u = link_dir(theta[i]);
    const Vec2 du = link_dir_d(theta[i]);
    const double r = com_radius(params, i);
    com[i] = o[i] + r * u;
    com_acc[i] =
        o_acc[i] + r * (alpha[i] * du) - (r * omega[i] * omega[i]) * u;
    o[i + 1] = o[i] + params.link_length[i] * u;
    o_acc[i + 1] = o_acc[i] + params.link_length[i] * (alpha[i] * du) -
                   (params.link_length[i] * omega[i] * omega[i]) * u;
  }

  // backward pass: joint forces and torques
  const Vec2 g_vec = with_gravity ? Vec2{0.0, -params.gravity} : Vec2{0.0, 0.0};
  std::vector<double> tau(n);
  Vec2 f_child = {0.0, 0.0};
  double n_child = 0.0;
  for (int i = n - 1; i >= 0; --i) {
    const Vec2 f = params.link_mass[i] * (com_acc[i] - g_vec) + f_child;
    const double ni = rot_inertia(params, i) * alpha[i] + n_child -
                      cross2(o[i] - com[i], f) +
                      cross2(o[i + 1] - com[i], f_child);
    tau[i] = ni;
    f_child = f;
    n_child = ni;
  }
  return tau;
}

std::vector<double> applied_torques(const SimState& state,
                                    const std::vector<double>& setpoint,
                                    const DynamicsParams& params) {
  const int n = params.n_links;
  std::vector<double> tau(n);
  for (int i = 0; i < n; ++i) {
    const double pd = params.pd_kp[i] * (setpoint[i] - state.q[i]) -
                      params.pd_kd[i] * state.qd[i];
    const double clamped =
        std::clamp(pd, -params.torque_limit[i], params.torque_limit[i]);
    tau[i] = params.motor_strength[i] * clamped -
             params.joint_damping[i] * state.qd[i];
  }
  return tau;
}

SimState step(const SimState& state, const Action& action,
              const DynamicsParams& params) {
  const int n = params.n_links;
  if (static_cast<int>(action.q_target.size()) != n)
    throw std::invalid_argument("action dimension mismatch");
  if (!all_finite(state.q) || !all_finite(state.qd) ||
      !all_finite(action.q_target))
    throw std::invalid_argument("non-finite state or action");

  SimState next = state;
  std::vector<double> setpoint;
  if (params.control_delay_steps == 0) {
    setpoint = action.q_target;
  } else {
    if (static_cast<int>(next.delay_buffer.size()) != params.control_delay_steps)
      throw std::invalid_argument("delay buffer not primed");
    setpoint = next.delay_buffer.front();
    next.delay_buffer.pop_front();
    next.delay_buffer.push_back(action.q_target);
  }

  const std::vector<double> tau = applied_torques(state, setpoint, params);

  // mass matrix via unit-acceleration inverse dynamics, bias via qdd = 0
  std::vector<double> zero(n, 0.0);
  const std::vector<double> bias =
      inverse_dynamics(state.q, state.qd, zero, params, true);
  Eigen::MatrixXd M(n, n);
  std::vector<double> e(n, 0.0);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    const std::vector<double> col =
        inverse_dynamics(state.q, zero, e, params, false);
    for (int i = 0; i < n; ++i) M(i, j) = col[i];
    e[j] = 0.0;
  }
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) rhs(i) = tau[i] - bias[i];
  const Eigen::VectorXd qdd = M.ldlt().solve(rhs);

  for (int i = 0; i < n; ++i) {
    next.qd[i] = state.qd[i] + params.dt * qdd(i);
    next.q[i] = state.q[i] + params.dt * next.qd[i];
  }
  next.t = state.t + params.dt;
  if (!all_finite(next.q) || !all_finite(next.qd))
    throw std::runtime_error("dynamics produced non-finite state");
  return next;
}

double energy(const SimState& state, const DynamicsParams& params) {
  const int n = params.n_links;
  double th = 0.0, om = 0.0;
  Vec2 o = {0.0, 0.0}, o_vel = {0.0, 0.0};
  double e = 0.0, hang_depth = 0.0;
  for (int i = 0; i < n; ++i) {
    th += state.q[i];
    om += state.qd[i];
    const Vec2 u = link_dir(th);
    const Vec2 du = link_dir_d(th);
    const double r = com_radius(params, i);
    const Vec2 com = o + r * u;
    const Vec2 com_vel = o_vel + (r * om) * du;
    // potential datum: the fully hanging pose (q = 0), so resting energy is 0
    e += 0.5 * params.link_mass[i] *
             (com_vel.x * com_vel.x + com_vel.y * com_vel.y) +
         0.5 * rot_inertia(params, i) * om * om +
         params.link_mass[i] * params.gravity * (com.y + hang_depth + r);
    o = o + params.link_length[i] * u;
    o_vel = o_vel + (params.link_length[i] * om) * du;
    hang_depth += params.link_length[i];
  }
  return e;
}

std::vector<Vec2> forward_kinematics(const std::vector<double>& q,
                                     const DynamicsParams& params) {
  const int n = params.n_links;
  std::vector<Vec2> pts(2 * n + 1);
  double th = 0.0;
  Vec2 o = {0.0, 0.0};
  for (int i = 0; i < n; ++i) {
    th += q[i];
    const Vec2 u = link_dir(th);
    pts[i] = o;
    pts[n + i] = o + com_radius(params, i) * u;
    o = o + params.link_length[i] * u;
  }
  pts[2 * n] = o;
  return pts;
}

}  // namespace dlalign
