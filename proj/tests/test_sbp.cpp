#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gnnmp/sbp.hpp"

using namespace gnnmp;

namespace {

std::shared_ptr<GnnRegressor> tiny_sampler_model(int input_dim, int output_dim) {
  Architecture a;
  a.input_dim = input_dim;
  a.output_dim = output_dim;
  a.width = 6;
  a.head_width = 6;
  a.order = 1;
  auto m = std::make_shared<GnnRegressor>(a, 3);
  m->network().output_layer().weight().value.setConstant(0.1);
  return m;
}

}  // namespace

TEST_CASE("state space unit coordinates round trip and wrap angles") {
  const StateSpace s = StateSpace::pendulum();
  const Eigen::Vector2d x(1.0, -3.0);
  CHECK((s.from_unit(s.to_unit(x)) - x).norm() < 1e-14);
  CHECK((s.to_unit(s.lower) + Eigen::Vector2d::Ones()).norm() < 1e-14);
  CHECK((s.to_unit(s.upper) - Eigen::Vector2d::Ones()).norm() < 1e-14);
  const Eigen::Vector2d d = s.difference(Eigen::Vector2d(3.0, 0), Eigen::Vector2d(-3.0, 0));
  CHECK(d(0) == doctest::Approx(6.0 - 2 * std::numbers::pi));
  const Eigen::Vector2d p = s.project(Eigen::Vector2d(4.0, 20.0));
  CHECK(p(0) == doctest::Approx(4.0 - 2 * std::numbers::pi));
  CHECK(p(1) == 8.0);
  const StateSpace arm = StateSpace::arm();
  CHECK(arm.dim() == 6);
  CHECK(arm.project(Eigen::VectorXd::Constant(6, 4.0))(0) == doctest::Approx(std::numbers::pi));
}

TEST_CASE("tree graph keeps each node's m nearest neighbors as nodes arrive") {
  Rng rng(1);
  std::uniform_real_distribution<double> unit(-1, 1);
  TreeGraph g(3);
  std::vector<Eigen::VectorXd> pts;
  for (int n = 0; n < 40; ++n) {
    Eigen::VectorXd p(2);
    p << unit(rng), unit(rng);
    pts.push_back(p);
    g.add(p);
    if (n == 0) continue;
    const Index k = std::min<Index>(3, n);
    const Eigen::MatrixXd b(g.binary_shift());
    const Eigen::MatrixXd s(g.shift());
    for (int i = 0; i <= n; ++i) {
      std::vector<std::pair<double, int>> order;
      for (int j = 0; j <= n; ++j)
        if (j != i) order.emplace_back((pts[i] - pts[j]).squaredNorm(), j);
      std::sort(order.begin(), order.end());
      Eigen::RowVectorXd expected = Eigen::RowVectorXd::Zero(n + 1);
      for (Index m = 0; m < k; ++m) expected(order[static_cast<std::size_t>(m)].second) = 1;
      CHECK((b.row(i) - expected).cwiseAbs().maxCoeff() == 0.0);
      CHECK(s.row(i).sum() == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("tree features are wrapped, unit-scaled offsets") {
  const StateSpace s = StateSpace::pendulum();
  const Eigen::Vector2d start(3.0, 0), goal(-3.0, 8);
  const FeatureMatrix f = tree_features(s, {Eigen::Vector2d(-3.0, 0)}, start, goal);
  REQUIRE(f.cols() == 4);
  CHECK(f(0, 0) == doctest::Approx((6.0 - 2 * std::numbers::pi) / std::numbers::pi));
  CHECK(f(0, 2) == doctest::Approx(0.0));
  CHECK(f(0, 3) == doctest::Approx(1.0));
}

TEST_CASE("initial graph holds x_init plus m valid samples within five sigma") {
  const StateSpace s = StateSpace::arm();
  const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(6, 0.3);
  int rejected = 0;
  auto valid = [&](const Eigen::VectorXd& q) {
    const bool ok = q(0) > 0.25;
    if (!ok) ++rejected;
    return ok;
  };
  const PlannerTrace t = initialize_online_graph(s, x0, 7, 25, 0.1, valid);
  REQUIRE(t.nodes.size() == 26);
  CHECK(t.nodes[0] == x0);
  const Eigen::VectorXd sigma = 0.1 * (s.upper - s.lower);
  for (const auto& q : t.nodes) {
    CHECK(q(0) > 0.25);
    CHECK(((q - x0).array().abs() <= 5 * sigma.array()).all());
  }
  CHECK(rejected > 0);
  CHECK_THROWS_AS(initialize_online_graph(s, x0, 7, 5, 0.1, [](const Eigen::VectorXd&) { return false; }, 50),
                  PlanningError);
}

TEST_CASE("uniform pendulum RRT paths replay exactly and reach the goal") {
  const PlannerOptions options;
  int solved = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const PendulumProblem problem = generate_pendulum_problem(seed);
    const PlannerTrace t = rrt_plan(problem, SamplerModel::uniform(), seed, options);
    CHECK(t.nodes_expanded == static_cast<int>(t.nodes.size()) - t.initial_size);
    CHECK(t.nodes.size() == t.parent.size());
    if (!t.success) continue;
    ++solved;
    REQUIRE(t.path.size() == t.path_controls.size() + 1);
    CHECK((t.path.front() - problem.start.vector()).norm() == 0.0);
    CHECK(pendulum_goal_reached(PendulumState::from(t.path.back()), problem.goal, options.goal_tol_theta,
                                options.goal_tol_omega));
    CHECK(replay_error(t, options) <= 1e-9);
    for (double u : t.path_controls) CHECK((u == 0 || std::abs(u) == PendulumParams{}.max_torque));
    CHECK(t.path_cost == doctest::Approx(0.25 * static_cast<double>(t.path_controls.size())));
  }
  CHECK(solved >= 6);
}

TEST_CASE("planner runs are reproducible per seed") {
  const PendulumProblem problem = generate_pendulum_problem(3);
  PlannerOptions options;
  options.max_iters = 600;
  SamplerModel learned;
  learned.kind = SamplerKind::gnn;
  learned.gnn = tiny_sampler_model(4, 2);
  for (const SamplerModel& sampler : {SamplerModel::uniform(), learned}) {
    const PlannerTrace a = rrt_plan(problem, sampler, 11, options);
    const PlannerTrace b = rrt_plan(problem, sampler.clone(), 11, options);
    CHECK(a.nodes_expanded == b.nodes_expanded);
    CHECK(a.success == b.success);
    REQUIRE(a.nodes.size() == b.nodes.size());
    for (std::size_t i = 0; i < a.nodes.size(); ++i) CHECK(a.nodes[i] == b.nodes[i]);
    CHECK(a.nodes_expanded == static_cast<int>(a.nodes.size()) - a.initial_size);
  }
}

TEST_CASE("clones do not share model state") {
  SamplerModel s;
  s.kind = SamplerKind::gnn;
  s.gnn = tiny_sampler_model(4, 2);
  const SamplerModel c = s.clone();
  CHECK(c.gnn != s.gnn);
  c.gnn->network().output_layer().bias().value.setConstant(5);
  CHECK(s.gnn->network().output_layer().bias().value(0, 0) == 0.0);
}

TEST_CASE("learned draws stay in the state space") {
  const StateSpace space = StateSpace::pendulum();
  SamplerGraph graph(space, Eigen::Vector2d(-1.5, 0), Eigen::Vector2d(1.5, 0), 5);
  for (int i = 0; i < 6; ++i) graph.add(Eigen::Vector2d(-1.5 + 0.1 * i, 0.2 * i));
  SamplerModel s;
  s.kind = SamplerKind::gnn;
  s.gnn = tiny_sampler_model(4, 2);
  s.gnn->network().output_layer().bias().value.setConstant(3.0);  // far outside [-1, 1]
  s.exploration = 0.0;
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd x = graph.draw(s, rng);
    CHECK(x(0) > -std::numbers::pi - 1e-12);
    CHECK(x(0) <= std::numbers::pi);
    CHECK(std::abs(x(1)) <= 8.0);
  }
  // Model predictions extend the graph; exploration draws leave it alone.
  CHECK(graph.nodes().size() == 206);
  s.kind = SamplerKind::uniform;
  graph.draw(s, rng);
  CHECK(graph.nodes().size() == 206);
}

TEST_CASE("BiRRT paths are collision free at the interpolation resolution") {
  const PlannerOptions options;
  int solved = 0;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const ArmScene scene = generate_arm_scene(101 + seed, options.arm_obstacles);
    const ArmProblem problem = generate_arm_problem(scene, seed);
    const PlannerTrace t = birrt_plan(problem, SamplerModel::uniform(), seed, options);
    CHECK(t.collision_checks > 0);
    CHECK(t.nodes_expanded == static_cast<int>(t.nodes.size()) - t.initial_size);
    if (!t.success) continue;
    ++solved;
    CHECK((t.path.front() - problem.start).norm() == 0.0);
    CHECK((t.path.back() - problem.goal).norm() == 0.0);
    double cost = 0;
    for (std::size_t i = 0; i + 1 < t.path.size(); ++i) {
      const Eigen::VectorXd a = t.path[i], b = t.path[i + 1];
      cost += (b - a).norm();
      CHECK((b - a).cwiseAbs().maxCoeff() <= options.arm_step + 1e-12);
      for (int k = 0; k <= options.arm_interpolation; ++k)
        CHECK(arm_config_free(a + (b - a) * (static_cast<double>(k) / options.arm_interpolation),
                              scene.link_lengths, scene.obstacles));
    }
    CHECK(cost == doctest::Approx(t.path_cost));
  }
  CHECK(solved >= 5);
}

TEST_CASE("a path of L states yields L-1 prefix records") {
  std::vector<Eigen::VectorXd> path;
  for (int i = 0; i < 5; ++i) path.push_back(Eigen::Vector2d(i, -i));
  const auto records = path_records(4, path, path.front(), Eigen::Vector2d(9, 9));
  REQUIRE(records.size() == 4);
  for (std::size_t p = 0; p < records.size(); ++p) {
    CHECK(records[p].prefix.size() == p + 1);
    CHECK(records[p].prefix.front() == path.front());
    CHECK(records[p].label == path[p + 1]);
    CHECK(records[p].problem_id == 4);
  }
  CHECK(path_records(0, {path[0]}, path[0], path[0]).empty());
  const SamplerRecord back = sampler_record_from_json(to_json(records[2]));
  CHECK(back.prefix == records[2].prefix);
  CHECK(back.label == records[2].label);
  CHECK(back.goal == records[2].goal);
}

TEST_CASE("offline collection turns solved problems into training samples") {
  OfflineOptions options;
  options.planner.max_iters = 3000;
  const SamplerDataset d = collect_offline_dataset(PlannerTask::pendulum, 6, 5, options);
  CHECK(d.attempted == 6);
  CHECK(d.solved > 0);
  const auto samples = sampler_training_samples(StateSpace::pendulum(), d.records, 5);
  REQUIRE(samples.size() == d.records.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(samples[i].features.rows() == static_cast<Index>(d.records[i].prefix.size()));
    CHECK(samples[i].features.cols() == 4);
    CHECK((samples[i].labels.row(0).transpose() - StateSpace::pendulum().to_unit(d.records[i].label)).norm() < 1e-15);
  }
  options.jobs = 2;
  const SamplerDataset again = collect_offline_dataset(PlannerTask::pendulum, 6, 5, options);
  REQUIRE(again.records.size() == d.records.size());
  for (std::size_t i = 0; i < d.records.size(); ++i) CHECK(again.records[i].label == d.records[i].label);
}

TEST_CASE("trace records carry the summary fields") {
  PlannerTrace t;
  t.success = true;
  t.nodes_expanded = 12;
  t.collision_checks = 40;
  t.path_cost = 1.5;
  t.wall_ms = 3;
  const auto r = trace_record(t, "p1", "gnn", 9, false);
  CHECK(r.at("nodes") == 12);
  CHECK(r.at("collision_checks") == 40);
  CHECK(r.at("sampler") == "gnn");
  CHECK_FALSE(r.contains("ms"));
  CHECK(trace_record(t, "p1", "gnn", 9, true).contains("ms"));
}
