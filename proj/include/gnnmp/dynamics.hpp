#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "gnnmp/env2d.hpp"

namespace gnnmp {

/// Wraps an angle to (-pi, pi].
double wrap_angle(double angle);

/// Pendulum with the angle measured from the horizontal; the stable
/// equilibrium sits at theta = -pi/2.
struct PendulumParams {
  double mass = 1.0;
  double length = 1.0;
  double gravity = 9.81;
  double max_torque = 1.5;
  double max_speed = 8.0;
  double dt = 0.05;
};

struct PendulumState {
  double theta = 0;
  double omega = 0;

  Eigen::Vector2d vector() const { return {theta, omega}; }
  static PendulumState from(const Eigen::Vector2d& v) { return {v(0), v(1)}; }
};

/// One RK4 step of theta'' = -(g/l) cos(theta) + u/(m l^2); the angle is
/// wrapped and the speed clamped afterwards.
PendulumState pendulum_step(const PendulumState& state, double torque, double dt,
                            const PendulumParams& params = {});

/// Same integration without wrapping or clamping, for energy studies.
PendulumState pendulum_rk4(const PendulumState& state, double torque, double dt,
                           const PendulumParams& params = {});

/// 0.5 m l^2 omega^2 + m g l sin(theta)
double pendulum_energy(const PendulumState& state, const PendulumParams& params = {});

bool pendulum_goal_reached(const PendulumState& state, const PendulumState& goal,
                           double tol_theta, double tol_omega);

// --- planar 6-joint arm -----------------------------------------------------

inline constexpr int kArmJoints = 6;
using ArmConfig = Eigen::Matrix<double, kArmJoints, 1>;
using LinkLengths = Eigen::Matrix<double, kArmJoints, 1>;

/// Joint positions from the fixed base at the origin out to the end effector.
std::array<Point2, kArmJoints + 1> arm_forward_kinematics(const ArmConfig& config,
                                                          const LinkLengths& lengths);

double segment_point_distance(const Point2& a, const Point2& b, const Point2& p);

/// True iff every link clears every (closed) disc.
bool arm_config_free(const ArmConfig& config, const LinkLengths& lengths,
                     const std::vector<Disc>& obstacles);

struct ArmScene {
  LinkLengths link_lengths = LinkLengths::Constant(1.0 / kArmJoints);
  std::vector<Disc> obstacles;
};

nlohmann::json to_json(const ArmScene& scene);
ArmScene arm_scene_from_json(const nlohmann::json& doc);

/// Disc clusters inside the arm's reach. Different seeds give different
/// obstacle layouts ("environments").
ArmScene generate_arm_scene(std::uint64_t seed, int n_obstacles);

}  // namespace gnnmp
