#include "gnnmp/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "gnnmp/rng.hpp"

namespace gnnmp {

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double wrapped = std::fmod(angle, two_pi);
  if (wrapped <= -std::numbers::pi) wrapped += two_pi;
  if (wrapped > std::numbers::pi) wrapped -= two_pi;
  return wrapped;
}

namespace {

Eigen::Vector2d pendulum_rate(const Eigen::Vector2d& s, double torque, const PendulumParams& p) {
  const double accel = -(p.gravity / p.length) * std::cos(s(0)) +
                       torque / (p.mass * p.length * p.length);
  return {s(1), accel};
}

}  // namespace

PendulumState pendulum_rk4(const PendulumState& state, double torque, double dt,
                           const PendulumParams& params) {
  const Eigen::Vector2d s = state.vector();
  const Eigen::Vector2d k1 = pendulum_rate(s, torque, params);
  const Eigen::Vector2d k2 = pendulum_rate(s + 0.5 * dt * k1, torque, params);
  const Eigen::Vector2d k3 = pendulum_rate(s + 0.5 * dt * k2, torque, params);
  const Eigen::Vector2d k4 = pendulum_rate(s + dt * k3, torque, params);
  return PendulumState::from(s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

PendulumState pendulum_step(const PendulumState& state, double torque, double dt,
                            const PendulumParams& params) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (std::abs(torque) > params.max_torque * (1.0 + 1e-12))
    throw std::invalid_argument("torque exceeds the control limit");
  PendulumState next = pendulum_rk4(state, torque, dt, params);
  next.theta = wrap_angle(next.theta);
  next.omega = std::clamp(next.omega, -params.max_speed, params.max_speed);
  return next;
}

double pendulum_energy(const PendulumState& state, const PendulumParams& params) {
  const double ml = params.mass * params.length;
  return 0.5 * ml * params.length * state.omega * state.omega +
         ml * params.gravity * std::sin(state.theta);
}

bool pendulum_goal_reached(const PendulumState& state, const PendulumState& goal,
                           double tol_theta, double tol_omega) {
  if (!(tol_theta > 0.0) || !(tol_omega > 0.0))
    throw std::invalid_argument("goal tolerances must be positive");
  return std::abs(wrap_angle(state.theta - goal.theta)) <= tol_theta &&
         std::abs(state.omega - goal.omega) <= tol_omega;
}

std::array<Point2, kArmJoints + 1> arm_forward_kinematics(const ArmConfig& config,
                                                          const LinkLengths& lengths) {
  std::array<Point2, kArmJoints + 1> joints;
  joints[0] = Point2::Zero();
  double heading = 0;
  for (int i = 0; i < kArmJoints; ++i) {
    heading += config(i);
    joints[i + 1] = joints[i] + lengths(i) * Point2(std::cos(heading), std::sin(heading));
  }
  return joints;
}

double segment_point_distance(const Point2& a, const Point2& b, const Point2& p) {
  const Point2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (a + t * ab - p).norm();
}

bool arm_config_free(const ArmConfig& config, const LinkLengths& lengths,
                     const std::vector<Disc>& obstacles) {
  if (obstacles.empty()) return true;
  const auto joints = arm_forward_kinematics(config, lengths);
  for (int i = 0; i < kArmJoints; ++i)
    for (const Disc& d : obstacles)
      if (segment_point_distance(joints[i], joints[i + 1], d.center) <= d.radius) return false;
  return true;
}

nlohmann::json to_json(const ArmScene& scene) {
  nlohmann::json doc;
  doc["link_lengths"] = nlohmann::json::array();
  for (int i = 0; i < kArmJoints; ++i) doc["link_lengths"].push_back(scene.link_lengths(i));
  doc["obstacles"] = nlohmann::json::array();
  for (const Disc& d : scene.obstacles)
    doc["obstacles"].push_back({d.center.x(), d.center.y(), d.radius});
  return doc;
}

ArmScene arm_scene_from_json(const nlohmann::json& doc) {
  ArmScene scene;
  const auto& lengths = doc.at("link_lengths");
  if (lengths.size() != kArmJoints) throw std::invalid_argument("arm needs 6 link lengths");
  for (int i = 0; i < kArmJoints; ++i) {
    scene.link_lengths(i) = lengths[static_cast<std::size_t>(i)].get<double>();
    if (!(scene.link_lengths(i) > 0.0)) throw std::invalid_argument("link lengths must be positive");
  }
  for (const auto& o : doc.at("obstacles"))
    scene.obstacles.push_back({Point2(o[0].get<double>(), o[1].get<double>()), o[2].get<double>()});
  return scene;
}

ArmScene generate_arm_scene(std::uint64_t seed, int n_obstacles) {
  Rng rng = make_stream(seed, "arm-scene");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ArmScene scene;
  // Discs sit on a ring around the base, leaving the region near the base clear.
  for (int i = 0; i < n_obstacles; ++i) {
    const double angle = 2.0 * std::numbers::pi * unit(rng);
    const double radius = 0.45 + 0.4 * unit(rng);
    scene.obstacles.push_back(
        {Point2(radius * std::cos(angle), radius * std::sin(angle)), 0.05 + 0.07 * unit(rng)});
  }
  return scene;
}

}  // namespace gnnmp
