#pragma once

#include <deque>
#include <string>
#include <vector>

namespace dlalign {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }

// Fixed-base planar chain, PD-actuated at every joint. Links are modelled as
// rods with a shiftable center of mass and rotational inertia m*L^2/12.
struct DynamicsParams {
  int n_links = 2;
  std::vector<double> link_mass;       // kg
  std::vector<double> link_length;     // m
  std::vector<double> com_offset;      // m, signed, relative to link center
  std::vector<double> joint_damping;   // N*m*s/rad
  double gravity = 9.81;               // m/s^2
  std::vector<double> pd_kp;           // N*m/rad
  std::vector<double> pd_kd;           // N*m*s/rad
  std::vector<double> torque_limit;    // N*m
  std::vector<double> motor_strength;  // dimensionless scale
  int control_delay_steps = 0;         // physics steps
  double dt = 1e-3;                    // s

  void validate() const;  // throws std::invalid_argument on violation
  bool operator==(const DynamicsParams&) const = default;
};

// Nominal two-link chain used by the default configs (total length 2.0 m).
DynamicsParams default_params(int n_links = 2);

struct Action {
  std::vector<double> q_target;  // rad, PD setpoint per joint
};

struct SimState {
  std::vector<double> q;   // rad
  std::vector<double> qd;  // rad/s
  double t = 0.0;          // s
  // last control_delay_steps setpoints, oldest first
  std::deque<std::vector<double>> delay_buffer;
};

// State with the delay buffer primed with `hold` (the setpoint assumed to
// have been applied before t=0).
SimState make_state(const DynamicsParams& params, std::vector<double> q,
                    std::vector<double> qd, const std::vector<double>& hold);

// Multiplicative/additive perturbation turning nominal params into the
// "real" proxy.
struct GapSpec {
  double mass_ratio = 1.0;
  double com_shift = 0.0;                   // m, added to every com_offset
  std::vector<double> kp_ratio;             // per joint
  std::vector<double> kd_ratio;             // per joint
  std::vector<double> motor_strength_ratio; // per joint
  int extra_delay_steps = 0;
  double extra_damping = 0.0;

  static GapSpec identity(int n_links);
  bool is_identity() const;
};

DynamicsParams apply_gap(const DynamicsParams& params, const GapSpec& gap);

// One physics step: PD torque on the delayed setpoint, torque clamp, motor
// scale, viscous joint damping, then semi-implicit Euler.
SimState step(const SimState& state, const Action& action,
              const DynamicsParams& params);

// Kinetic + gravitational potential energy; potential datum at the fully
// hanging pose (q = 0), so resting energy is zero.
double energy(const SimState& state, const DynamicsParams& params);

// Joint positions (base joint first), link COMs, then end effector.
// Layout: pts[0..n-1] joints, pts[n..2n-1] COMs, pts[2n] end effector.
std::vector<Vec2> forward_kinematics(const std::vector<double>& q,
                                     const DynamicsParams& params);

inline int body_point_count(int n_links) { return 2 * n_links + 1; }

// Point index used as root for root-relative metrics: the outboard joint of
// the first link (end effector for a single link).
inline int root_point_index(int n_links) { return n_links >= 2 ? 1 : 2 * n_links; }

// Recursive Newton-Euler: torques realizing (q, qd, qdd). Gravity included
// unless with_gravity is false; joint damping is not included.
std::vector<double> inverse_dynamics(const std::vector<double>& q,
                                     const std::vector<double>& qd,
                                     const std::vector<double>& qdd,
                                     const DynamicsParams& params,
                                     bool with_gravity = true);

// Torques actually applied at the current step (post clamp, motor scale,
// damping), exposed for reward penalties.
std::vector<double> applied_torques(const SimState& state,
                                    const std::vector<double>& setpoint,
                                    const DynamicsParams& params);

}  // namespace dlalign
