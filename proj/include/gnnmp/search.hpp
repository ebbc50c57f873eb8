#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnnmp/cspace_graph.hpp"
#include "gnnmp/env2d.hpp"

namespace gnnmp {

struct Path {
  std::vector<Index> nodes;
  double cost = 0;
};

/// A* over graph edges from `source` to `target`, Euclidean heuristic scaled
/// by `heuristic_scale` (admissible while every weight is at least the scaled
/// Euclidean length). `removed`, when set, is treated as absent.
std::optional<Path> shortest_path_between(const CSpaceGraph& graph, Index source, Index target,
                                          std::optional<Index> removed = std::nullopt,
                                          double heuristic_scale = 1.0);

/// Nearest free vertex joined to `p` by a free segment.
std::optional<Index> attach_vertex(const CSpaceGraph& graph, const World2D& world,
                                   const Point2& p);

/// Minimum-cost path on a world-restricted graph with start and goal attached
/// to their nearest reachable free vertices; nullopt when infeasible.
std::optional<Path> shortest_path(const CSpaceGraph& graph, const PlanningProblem2D& problem);

/// Interior path nodes ranked by the cost of the best path avoiding them.
/// Only nodes whose removal raises the cost beyond path.cost*(1 + 1e-9) are kept.
std::vector<Index> bottleneck_nodes(const CSpaceGraph& graph, const Path& path);

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split { train, validation, test };
std::string to_string(Split split);
Split split_from_string(const std::string& text);

struct CriticalProblem {
  int id = 0;
  PlanningProblem2D problem;
  std::vector<Point2> labels;  // bottleneck positions, most critical first
  Split split = Split::train;
};

struct CriticalDatasetOptions {
  int min_walls = 1;
  int max_walls = 2;
  double corridor_width = 0.08;
  /// Keep at most this many bottleneck labels per problem; 0 keeps all.
  int max_labels = 3;
  int jobs = 1;
};

struct CriticalDataset {
  std::vector<CriticalProblem> problems;  // labeled problems, ordered by id
  int attempted = 0;

  std::size_t sample_count() const;
  std::size_t sample_count(Split split) const;
};

/// Seed used to generate the problem with index `id`.
std::uint64_t problem_seed(std::uint64_t seed, int id);

/// Generates problems on `dense_graph`, labels each with its bottleneck
/// nodes and splits them 70/15/15 by problem id.
CriticalDataset build_dataset(int n_problems, std::uint64_t seed, const CSpaceGraph& dense_graph,
                              const CriticalDatasetOptions& options = {});

/// Bottleneck labels of a single problem on the dense graph.
std::vector<Point2> critical_labels(const CSpaceGraph& dense_graph,
                                    const PlanningProblem2D& problem, int max_labels);

/// One JSON record per sample.
std::vector<nlohmann::json> dataset_records(const CriticalDataset& dataset);
CriticalDataset dataset_from_records(const std::vector<nlohmann::json>& records);

}  // namespace gnnmp
