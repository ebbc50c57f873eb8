#include "gnnmp/search.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <queue>

#include "gnnmp/parallel.hpp"
#include "gnnmp/rng.hpp"

namespace gnnmp {

std::optional<Path> shortest_path_between(const CSpaceGraph& graph, Index source, Index target,
                                          std::optional<Index> removed, double heuristic_scale) {
  const Index n = graph.size();
  if (source < 0 || source >= n || target < 0 || target >= n)
    throw std::out_of_range("vertex index out of range");
  if (removed && (*removed == source || *removed == target)) return std::nullopt;
  if (source == target) return Path{{source}, 0.0};

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> g(static_cast<std::size_t>(n), inf);
  std::vector<Index> parent(static_cast<std::size_t>(n), -1);
  std::vector<char> closed(static_cast<std::size_t>(n), 0);
  auto heuristic = [&](Index v) {
    return heuristic_scale * (graph.positions.row(v) - graph.positions.row(target)).norm();
  };
  // (f, vertex); ties resolve toward the lower index
  using Entry = std::pair<double, Index>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  g[static_cast<std::size_t>(source)] = 0.0;
  open.emplace(heuristic(source), source);
  while (!open.empty()) {
    const Index u = open.top().second;
    open.pop();
    auto uu = static_cast<std::size_t>(u);
    if (closed[uu]) continue;
    closed[uu] = 1;
    if (u == target) break;
    for (const Neighbor& nb : graph.neighbors[uu]) {
      if (removed && nb.vertex == *removed) continue;
      auto vv = static_cast<std::size_t>(nb.vertex);
      if (closed[vv]) continue;
      const double candidate = g[uu] + nb.weight;
      if (candidate < g[vv]) {
        g[vv] = candidate;
        parent[vv] = u;
        open.emplace(candidate + heuristic(nb.vertex), nb.vertex);
      }
    }
  }
  if (g[static_cast<std::size_t>(target)] == inf) return std::nullopt;
  Path path;
  path.cost = g[static_cast<std::size_t>(target)];
  for (Index v = target; v != -1; v = parent[static_cast<std::size_t>(v)]) path.nodes.push_back(v);
  std::reverse(path.nodes.begin(), path.nodes.end());
  return path;
}

std::optional<Index> attach_vertex(const CSpaceGraph& graph, const World2D& world,
                                   const Point2& p) {
  std::vector<std::pair<double, Index>> order;
  order.reserve(static_cast<std::size_t>(graph.size()));
  for (Index i = 0; i < graph.size(); ++i)
    order.emplace_back((graph.positions.row(i).transpose() - p).squaredNorm(), i);
  std::sort(order.begin(), order.end());
  for (const auto& [dist2, i] : order) {
    const Point2 q = graph.positions.row(i).transpose();
    if (is_free(world, q) && segment_free(world, p, q)) return i;
  }
  return std::nullopt;
}

std::optional<Path> shortest_path(const CSpaceGraph& graph, const PlanningProblem2D& problem) {
  const auto source = attach_vertex(graph, problem.world, problem.start);
  const auto target = attach_vertex(graph, problem.world, problem.goal);
  if (!source || !target) return std::nullopt;
  return shortest_path_between(graph, *source, *target);
}

std::vector<Index> bottleneck_nodes(const CSpaceGraph& graph, const Path& path) {
  if (path.nodes.size() < 3) return {};
  const Index source = path.nodes.front();
  const Index target = path.nodes.back();
  const double threshold = path.cost + 1e-9 * path.cost;
  std::vector<std::pair<double, Index>> ranked;
  for (std::size_t i = 1; i + 1 < path.nodes.size(); ++i) {
    const Index v = path.nodes[i];
    const auto detour = shortest_path_between(graph, source, target, v);
    const double alt = detour ? detour->cost : std::numeric_limits<double>::infinity();
    if (alt > threshold) ranked.emplace_back(alt, v);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<Index> out;
  out.reserve(ranked.size());
  for (const auto& entry : ranked) out.push_back(entry.second);
  return out;
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "validation") return Split::validation;
  if (text == "test") return Split::test;
  throw std::invalid_argument("unknown split: " + text);
}

std::size_t CriticalDataset::sample_count() const {
  std::size_t n = 0;
  for (const auto& p : problems) n += p.labels.size();
  return n;
}

std::size_t CriticalDataset::sample_count(Split split) const {
  std::size_t n = 0;
  for (const auto& p : problems)
    if (p.split == split) n += p.labels.size();
  return n;
}

std::uint64_t problem_seed(std::uint64_t seed, int id) {
  return stream_seed(seed, "problem", static_cast<std::uint64_t>(id));
}

std::vector<Point2> critical_labels(const CSpaceGraph& dense_graph,
                                    const PlanningProblem2D& problem, int max_labels) {
  const CSpaceGraph restricted = restrict_to_world(dense_graph, problem.world);
  const auto path = shortest_path(restricted, problem);
  if (!path) return {};
  std::vector<Index> nodes = bottleneck_nodes(restricted, *path);
  if (max_labels > 0 && nodes.size() > static_cast<std::size_t>(max_labels))
    nodes.resize(static_cast<std::size_t>(max_labels));
  std::vector<Point2> labels;
  for (Index v : nodes) labels.push_back(dense_graph.positions.row(v).transpose());
  return labels;
}

CriticalDataset build_dataset(int n_problems, std::uint64_t seed, const CSpaceGraph& dense_graph,
                              const CriticalDatasetOptions& options) {
  if (n_problems < 0) throw std::invalid_argument("n_problems must be non-negative");
  if (options.min_walls < 0 || options.max_walls < options.min_walls)
    throw std::invalid_argument("invalid wall count range");
  CriticalDataset dataset;
  dataset.attempted = n_problems;
  if (n_problems == 0) return dataset;

  auto labeled = parallel_map(static_cast<std::size_t>(n_problems), options.jobs,
                              [&](std::size_t i) {
    const int id = static_cast<int>(i);
    const std::uint64_t pseed = problem_seed(seed, id);
    Rng rng = make_stream(pseed, "walls");
    std::uniform_int_distribution<int> walls(options.min_walls, options.max_walls);
    CriticalProblem entry;
    entry.id = id;
    entry.problem = generate_problem(pseed, walls(rng), options.corridor_width);
    entry.labels = critical_labels(dense_graph, entry.problem, options.max_labels);
    return entry;
  });
  for (auto& entry : labeled)
    if (!entry.labels.empty()) dataset.problems.push_back(std::move(entry));
  if (dataset.problems.size() < 10)
    throw DatasetError("only " + std::to_string(dataset.problems.size()) +
                       " labeled problems produced (need at least 10)");

  std::vector<std::size_t> order(dataset.problems.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_stream(seed, "split");
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n = order.size();
  const std::size_t n_train = (n * 70) / 100;
  const std::size_t n_val = (n * 15) / 100;
  for (std::size_t rank = 0; rank < n; ++rank) {
    Split split = Split::test;
    if (rank < n_train) split = Split::train;
    else if (rank < n_train + n_val) split = Split::validation;
    dataset.problems[order[rank]].split = split;
  }
  return dataset;
}

std::vector<nlohmann::json> dataset_records(const CriticalDataset& dataset) {
  std::vector<nlohmann::json> records;
  for (const auto& p : dataset.problems) {
    const nlohmann::json world = to_json(p.problem.world);
    for (const Point2& label : p.labels) {
      records.push_back({{"problem_id", p.id},
                         {"world", world},
                         {"x_init", {p.problem.start.x(), p.problem.start.y()}},
                         {"x_goal", {p.problem.goal.x(), p.problem.goal.y()}},
                         {"label", {label.x(), label.y()}},
                         {"split", to_string(p.split)}});
    }
  }
  return records;
}

CriticalDataset dataset_from_records(const std::vector<nlohmann::json>& records) {
  std::map<int, CriticalProblem> by_id;
  auto point = [](const nlohmann::json& v) { return Point2(v[0].get<double>(), v[1].get<double>()); };
  for (const auto& r : records) {
    const int id = r.at("problem_id").get<int>();
    auto [it, inserted] = by_id.try_emplace(id);
    CriticalProblem& p = it->second;
    if (inserted) {
      p.id = id;
      p.problem.world = world_from_json(r.at("world"));
      p.problem.start = point(r.at("x_init"));
      p.problem.goal = point(r.at("x_goal"));
      p.split = split_from_string(r.at("split").get<std::string>());
    }
    p.labels.push_back(point(r.at("label")));
  }
  CriticalDataset dataset;
  for (auto& [id, p] : by_id) dataset.problems.push_back(std::move(p));
  dataset.attempted = static_cast<int>(dataset.problems.size());
  return dataset;
}

}  // namespace gnnmp
