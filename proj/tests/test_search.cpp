#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <set>

#include "gnnmp/search.hpp"

using namespace gnnmp;

namespace {

// O(N^2) Dijkstra without a heap.
std::vector<double> dijkstra(const CSpaceGraph& g, Index source, Index removed = -1) {
  const auto n = static_cast<std::size_t>(g.size());
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<bool> done(n, false);
  dist[static_cast<std::size_t>(source)] = 0;
  for (std::size_t it = 0; it < n; ++it) {
    std::size_t u = n;
    for (std::size_t v = 0; v < n; ++v)
      if (!done[v] && static_cast<Index>(v) != removed && (u == n || dist[v] < dist[u])) u = v;
    if (u == n || dist[u] == std::numeric_limits<double>::infinity()) break;
    done[u] = true;
    for (const Edge& e : g.edges) {
      if (e.u == removed || e.v == removed) continue;
      const auto a = static_cast<std::size_t>(e.u), b = static_cast<std::size_t>(e.v);
      if (a == u) dist[b] = std::min(dist[b], dist[u] + e.weight);
      if (b == u) dist[a] = std::min(dist[a], dist[u] + e.weight);
    }
  }
  return dist;
}

CSpaceGraph graph_from_edges(const Eigen::MatrixXd& positions, const std::vector<std::pair<Index, Index>>& pairs) {
  CSpaceGraph g;
  g.positions = positions;
  for (auto [u, v] : pairs) g.edges.push_back({u, v, (positions.row(u) - positions.row(v)).norm()});
  finalize_graph(g);
  return g;
}

}  // namespace

TEST_CASE("A* costs agree with Dijkstra on random graphs") {
  Rng rng(17);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    Eigen::MatrixXd p(120, 2);
    for (Index i = 0; i < p.rows(); ++i) p.row(i) << unit(rng), unit(rng);
    const CSpaceGraph g = build_r_disc_graph(p, 0.15);
    const Index s = trial % 120, t = (trial * 37 + 5) % 120;
    const auto oracle = dijkstra(g, s);
    const auto path = shortest_path_between(g, s, t);
    if (oracle[static_cast<std::size_t>(t)] == std::numeric_limits<double>::infinity()) {
      CHECK_FALSE(path.has_value());
      continue;
    }
    REQUIRE(path.has_value());
    CHECK(path->cost == doctest::Approx(oracle[static_cast<std::size_t>(t)]).epsilon(1e-12));
    CHECK(path->nodes.front() == s);
    CHECK(path->nodes.back() == t);
    // The reported cost is the sum of its edges.
    double sum = 0;
    for (std::size_t i = 1; i < path->nodes.size(); ++i)
      sum += (g.positions.row(path->nodes[i]) - g.positions.row(path->nodes[i - 1])).norm();
    CHECK(sum == doctest::Approx(path->cost).epsilon(1e-12));
  }
}

TEST_CASE("removing a vertex reroutes around it") {
  Eigen::MatrixXd p(4, 2);
  p << 0, 0, 0.5, 0.1, 0.5, -0.3, 1, 0;
  const CSpaceGraph g = graph_from_edges(p, {{0, 1}, {1, 3}, {0, 2}, {2, 3}});
  const auto best = shortest_path_between(g, 0, 3);
  REQUIRE(best);
  CHECK(best->nodes == std::vector<Index>{0, 1, 3});
  const auto detour = shortest_path_between(g, 0, 3, Index{1});
  REQUIRE(detour);
  CHECK(detour->nodes == std::vector<Index>{0, 2, 3});
  CHECK_FALSE(shortest_path_between(g, 0, 3, Index{0}).has_value());
  CHECK_THROWS_AS(shortest_path_between(g, 0, 9), std::out_of_range);
}

TEST_CASE("a bridge vertex is the only bottleneck and ranks first") {
  // Two triangles joined through vertex 3; the left triangle offers a cheap
  // and an expensive way around vertex 1.
  Eigen::MatrixXd p(7, 2);
  p << 0, 0, 0.2, 0.05, 0.2, 0.4, 0.5, 0, 0.8, 0.05, 0.8, -0.05, 1, 0;
  const CSpaceGraph g = graph_from_edges(p, {{0, 1}, {1, 3}, {0, 2}, {2, 3}, {3, 4}, {3, 5}, {4, 6}, {5, 6}});
  const auto path = shortest_path_between(g, 0, 6);
  REQUIRE(path);
  const auto critical = bottleneck_nodes(g, *path);
  REQUIRE(!critical.empty());
  CHECK(critical.front() == 3);
  // Interior vertices with an equal-cost alternative are not bottlenecks.
  const std::set<Index> chosen(critical.begin(), critical.end());
  CHECK(chosen.count(4) + chosen.count(5) == 0);
  // Vertex 1 has an alternative, but a costlier one.
  CHECK(chosen.count(1) == 1);
  CHECK(critical.size() == 2);
}

TEST_CASE("bottleneck ranking orders by detour cost") {
  // Each interior vertex is checked against Dijkstra with it removed.
  const PlanningProblem2D problem = generate_problem(21, 2, 0.08);
  const CSpaceGraph g = restrict_to_world(build_r_disc_graph(halton_points(800, 2), 0.07), problem.world);
  const auto path = shortest_path(g, problem);
  REQUIRE(path);
  const auto critical = bottleneck_nodes(g, *path);
  REQUIRE(!critical.empty());
  const Index s = path->nodes.front(), t = path->nodes.back();
  double previous = std::numeric_limits<double>::infinity();
  for (Index v : critical) {
    const double alt = dijkstra(g, s, v)[static_cast<std::size_t>(t)];
    CHECK(alt > path->cost * (1 + 1e-9));
    CHECK(alt <= previous);
    previous = alt;
  }
  const std::set<Index> chosen(critical.begin(), critical.end());
  for (std::size_t i = 1; i + 1 < path->nodes.size(); ++i) {
    const Index v = path->nodes[i];
    if (!chosen.count(v)) CHECK(dijkstra(g, s, v)[static_cast<std::size_t>(t)] <= path->cost * (1 + 1e-9));
  }
}

TEST_CASE("dataset labels are free bottleneck positions, split by problem") {
  const CSpaceGraph g = build_r_disc_graph(halton_points(600, 2), 0.07);
  CriticalDatasetOptions options;
  options.max_labels = 2;
  const CriticalDataset d = build_dataset(40, 9, g, options);
  CHECK(d.attempted == 40);
  REQUIRE(d.problems.size() >= 10);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& p : d.problems) {
    CHECK(!p.labels.empty());
    CHECK(p.labels.size() <= 2);
    for (const Point2& l : p.labels) CHECK(is_free(p.problem.world, l));
    CHECK(p.labels == critical_labels(g, p.problem, 2));
    ++counts[static_cast<int>(p.split)];
  }
  const std::size_t n = d.problems.size();
  CHECK(counts[0] == n * 70 / 100);
  CHECK(counts[1] == n * 15 / 100);
  CHECK(counts[0] + counts[1] + counts[2] == n);
  CHECK(d.sample_count() == d.sample_count(Split::train) + d.sample_count(Split::validation) +
                                d.sample_count(Split::test));

  const CriticalDataset back = dataset_from_records(dataset_records(d));
  REQUIRE(back.problems.size() == d.problems.size());
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(back.problems[i].id == d.problems[i].id);
    CHECK(back.problems[i].labels == d.problems[i].labels);
    CHECK(back.problems[i].split == d.problems[i].split);
    CHECK(back.problems[i].problem.world == d.problems[i].problem.world);
  }
  CHECK(build_dataset(0, 9, g).problems.empty());
  CHECK_THROWS_AS(build_dataset(-1, 9, g), std::invalid_argument);
}

TEST_CASE("dataset generation is independent of the job count") {
  const CSpaceGraph g = build_r_disc_graph(halton_points(400, 2), 0.09);
  CriticalDatasetOptions serial, threaded;
  threaded.jobs = 3;
  CHECK(dataset_records(build_dataset(20, 4, g, serial)) == dataset_records(build_dataset(20, 4, g, threaded)));
}
