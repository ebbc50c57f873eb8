#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gnnmp/dynamics.hpp"
#include "gnnmp/rng.hpp"

using namespace gnnmp;

namespace {

constexpr double pi = std::numbers::pi;

PendulumState integrate(PendulumState s, double torque, double dt, double duration) {
  const int steps = static_cast<int>(std::lround(duration / dt));
  for (int i = 0; i < steps; ++i) s = pendulum_rk4(s, torque, dt);
  return s;
}

ArmConfig random_config(Rng& rng) {
  std::uniform_real_distribution<double> angle(-pi, pi);
  ArmConfig q;
  for (int i = 0; i < kArmJoints; ++i) q(i) = angle(rng);
  return q;
}

}  // namespace

TEST_CASE("wrap_angle maps into (-pi, pi] and preserves the angle") {
  Rng rng(1);
  std::uniform_real_distribution<double> wide(-50, 50);
  for (int i = 0; i < 1000; ++i) {
    const double a = wide(rng);
    const double w = wrap_angle(a);
    CHECK(w > -pi);
    CHECK(w <= pi);
    CHECK(std::remainder(a - w, 2 * pi) == doctest::Approx(0.0).epsilon(1e-9).scale(1));
  }
  CHECK(wrap_angle(pi) == doctest::Approx(pi));
  CHECK(wrap_angle(-pi) == doctest::Approx(pi));
}

TEST_CASE("hanging rest is an equilibrium and the upright is unstable") {
  const PendulumState hang{-pi / 2, 0};
  const PendulumState after = integrate(hang, 0, 0.01, 5);
  CHECK(std::abs(after.theta + pi / 2) < 1e-12);
  CHECK(std::abs(after.omega) < 1e-12);
  const PendulumState up = integrate({pi / 2 + 1e-6, 0}, 0, 0.01, 3);
  CHECK(std::abs(up.theta - pi / 2) > 1e-3);
}

TEST_CASE("small oscillations follow the linearized period") {
  // Around -pi/2 the dynamics linearize to phi'' = -(g/l) phi.
  const double amplitude = 1e-3, omega0 = std::sqrt(9.81);
  const double period = 2 * pi / omega0;
  const PendulumState s = integrate({-pi / 2 + amplitude, 0}, 0, period / 2000, period);
  CHECK(s.theta + pi / 2 == doctest::Approx(amplitude).epsilon(1e-5));
  const PendulumState quarter = integrate({-pi / 2 + amplitude, 0}, 0, period / 2000, period / 4);
  CHECK(std::abs(quarter.theta + pi / 2) < 1e-8);
  CHECK(quarter.omega == doctest::Approx(-amplitude * omega0).epsilon(1e-5));
}

TEST_CASE("RK4 global error shrinks with the fourth power of the step") {
  const PendulumState s0{-0.3, 1.0};
  const PendulumState reference = integrate(s0, 0.7, 1e-4, 1.0);
  auto error = [&](double dt) {
    const PendulumState s = integrate(s0, 0.7, dt, 1.0);
    return std::hypot(s.theta - reference.theta, s.omega - reference.omega);
  };
  const double ratio = error(0.05) / error(0.025);
  CHECK(ratio > 12);
  CHECK(ratio < 20);
}

TEST_CASE("unforced energy drift stays below 1e-6 over 10 s") {
  Rng rng(2);
  std::uniform_real_distribution<double> th(-pi, pi), om(-4, 4);
  for (int trial = 0; trial < 10; ++trial) {
    PendulumState s{th(rng), om(rng)};
    const double e0 = pendulum_energy(s);
    if (std::abs(e0) < 1.0) continue;
    s = integrate(s, 0, 0.01, 10);
    CHECK(std::abs(pendulum_energy(s) - e0) / std::abs(e0) <= 1e-6);
  }
}

TEST_CASE("constrained step wraps, clamps and enforces the torque limit") {
  const PendulumParams p;
  const PendulumState fast = pendulum_step({0.0, 7.99}, 1.5, 0.05);
  CHECK(std::abs(fast.omega) <= p.max_speed);
  const PendulumState over = pendulum_step({3.1, 5.0}, 0, 0.05);
  CHECK(over.theta <= pi);
  CHECK(over.theta > -pi);
  CHECK(over.theta < 0);  // crossed the +-pi seam
  CHECK_THROWS_AS(pendulum_step({0, 0}, 1.6, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(pendulum_step({0, 0}, 0, 0.0), std::invalid_argument);
}

TEST_CASE("goal test uses wrapped angle distance") {
  CHECK(pendulum_goal_reached({pi - 0.05, 0.1}, {-pi + 0.05, 0}, 0.2, 0.5));
  CHECK_FALSE(pendulum_goal_reached({0.5, 0}, {0, 0}, 0.2, 0.5));
  CHECK_FALSE(pendulum_goal_reached({0, 0.6}, {0, 0}, 0.2, 0.5));
  CHECK_THROWS(pendulum_goal_reached({0, 0}, {0, 0}, 0, 0.5));
}

TEST_CASE("forward kinematics preserves link lengths and obeys the triangle inequality") {
  Rng rng(3);
  const LinkLengths lengths = ArmScene{}.link_lengths;
  for (int trial = 0; trial < 200; ++trial) {
    const ArmConfig q = random_config(rng);
    const auto joints = arm_forward_kinematics(q, lengths);
    CHECK(joints[0].norm() == 0.0);
    for (int i = 0; i < kArmJoints; ++i)
      CHECK((joints[static_cast<std::size_t>(i + 1)] - joints[static_cast<std::size_t>(i)]).norm() ==
            doctest::Approx(lengths(i)).epsilon(1e-12));
    CHECK(joints.back().norm() <= lengths.sum() + 1e-12);
  }
  // Zero configuration stretches along +x; joint angles are relative.
  ArmConfig q = ArmConfig::Zero();
  CHECK((arm_forward_kinematics(q, lengths).back() - Point2(1, 0)).norm() < 1e-12);
  q(0) = pi / 2;
  CHECK((arm_forward_kinematics(q, lengths).back() - Point2(0, 1)).norm() < 1e-12);
  q(1) = -pi / 2;
  CHECK((arm_forward_kinematics(q, lengths)[1] - Point2(0, lengths(0))).norm() < 1e-12);
  CHECK((arm_forward_kinematics(q, lengths).back() - Point2(1 - lengths(0), lengths(0))).norm() < 1e-12);
}

TEST_CASE("joint positions are Lipschitz in the configuration") {
  // Joint j moves at most sum_{i<j} (reach beyond joint i) * |dq_i|.
  Rng rng(4);
  const LinkLengths lengths = ArmScene{}.link_lengths;
  std::normal_distribution<double> small(0, 0.05);
  for (int trial = 0; trial < 500; ++trial) {
    const ArmConfig q = random_config(rng);
    ArmConfig dq;
    for (int i = 0; i < kArmJoints; ++i) dq(i) = small(rng);
    const auto a = arm_forward_kinematics(q, lengths);
    const auto b = arm_forward_kinematics(q + dq, lengths);
    for (int j = 1; j <= kArmJoints; ++j) {
      double bound = 0;
      for (int i = 0; i < j; ++i) bound += lengths.segment(i, j - i).sum() * std::abs(dq(i));
      CHECK((a[static_cast<std::size_t>(j)] - b[static_cast<std::size_t>(j)]).norm() <= bound + 1e-12);
    }
  }
}

TEST_CASE("segment-point distance agrees with dense sampling") {
  Rng rng(5);
  std::uniform_real_distribution<double> unit(-1, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const Point2 a(unit(rng), unit(rng)), b(unit(rng), unit(rng)), p(unit(rng), unit(rng));
    double best = 1e9;
    for (int i = 0; i <= 10000; ++i) best = std::min(best, (a + (b - a) * (i / 10000.0) - p).norm());
    const double d = segment_point_distance(a, b, p);
    CHECK(d <= best + 1e-12);
    CHECK(d >= best - (b - a).norm() / 10000.0);
  }
  CHECK(segment_point_distance(Point2(1, 1), Point2(1, 1), Point2(4, 5)) == doctest::Approx(5.0));
}

TEST_CASE("arm collision test agrees with 1000 samples per link") {
  Rng rng(6);
  const ArmScene scene = generate_arm_scene(101, 8);
  int blocked = 0, clear = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const ArmConfig q = random_config(rng);
    const auto joints = arm_forward_kinematics(q, scene.link_lengths);
    bool hit = false;
    double margin = 1e9;
    for (int link = 0; link < kArmJoints; ++link)
      for (int i = 0; i <= 1000; ++i) {
        const Point2 x = joints[static_cast<std::size_t>(link)] +
                         (joints[static_cast<std::size_t>(link + 1)] - joints[static_cast<std::size_t>(link)]) * (i / 1000.0);
        for (const Disc& d : scene.obstacles) {
          const double gap = (x - d.center).norm() - d.radius;
          hit = hit || gap <= 0;
          margin = std::min(margin, std::abs(gap));
        }
      }
    const bool free = arm_config_free(q, scene.link_lengths, scene.obstacles);
    // Sampling can miss a graze thinner than the sample spacing.
    if (hit) CHECK_FALSE(free);
    else if (margin > 1e-3) CHECK(free);
    (free ? clear : blocked)++;
  }
  CHECK(blocked > 0);
  CHECK(clear > 0);
}

TEST_CASE("arm scenes are seeded and survive a JSON round trip") {
  const ArmScene a = generate_arm_scene(202, 8);
  CHECK(a.obstacles.size() == 8);
  const ArmScene b = arm_scene_from_json(to_json(a));
  CHECK(b.link_lengths == a.link_lengths);
  REQUIRE(b.obstacles.size() == a.obstacles.size());
  for (std::size_t i = 0; i < a.obstacles.size(); ++i) CHECK(b.obstacles[i] == a.obstacles[i]);
  CHECK_FALSE(generate_arm_scene(303, 8).obstacles[0] == a.obstacles[0]);
}
