#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnnmp/env2d.hpp"
#include "gnnmp/rng.hpp"

namespace gnnmp {

using Index = Eigen::Index;
using SparseShift = Eigen::SparseMatrix<double, Eigen::RowMajor>;
/// Per-node feature rows.
using FeatureMatrix = Eigen::MatrixXd;

enum class ShiftKind { adjacency, normalized, knn };

std::string to_string(ShiftKind kind);
ShiftKind shift_kind_from_string(const std::string& text);

struct Edge {
  Index u = 0;
  Index v = 0;
  double weight = 0;
};

struct Neighbor {
  Index vertex = 0;
  double weight = 0;
};

/// Undirected weighted graph over points in R^d, with its shift operator.
struct CSpaceGraph {
  Eigen::MatrixXd positions;  // N x d
  std::vector<Edge> edges;    // u < v
  std::vector<std::vector<Neighbor>> neighbors;
  ShiftKind shift_kind = ShiftKind::adjacency;
  Index knn_k = 0;  // only meaningful for ShiftKind::knn
  SparseShift shift;

  Index size() const { return positions.rows(); }
  Index dim() const { return positions.cols(); }
};

/// Rebuilds `neighbors` and the binary adjacency shift from `edges`.
void finalize_graph(CSpaceGraph& graph);

/// Halton points: row i holds the radical inverse of i+1 in the first d primes.
Eigen::MatrixXd halton_points(Index n, Index d);

CSpaceGraph build_r_disc_graph(const Eigen::MatrixXd& points, double radius,
                               const World2D* world = nullptr);

/// Drops every edge whose connecting segment is not free in `world`.
CSpaceGraph restrict_to_world(const CSpaceGraph& graph, const World2D& world,
                              double step = kDefaultCollisionStep);

/// Binary k-nearest-neighbor operator: row n has a 1 at each of the k points
/// closest to point n (excluding n), ties broken by lower index.
SparseShift build_knn_shift(const Eigen::MatrixXd& points, Index k);

/// Largest-eigenvalue estimate from `iterations` power-iteration steps
/// started at the all-ones vector.
double spectral_radius_estimate(const SparseShift& shift, int iterations = 10);

/// shift / spectral_radius_estimate(shift); a zero operator is returned unchanged.
SparseShift normalize_shift(const SparseShift& shift, int iterations = 10);

/// Sets graph.shift to the normalized adjacency.
void use_normalized_shift(CSpaceGraph& graph);

/// Sets graph.shift to the k-nearest-neighbor operator of its positions.
void use_knn_shift(CSpaceGraph& graph, Index k);

/// Node features [start - x_n, goal - x_n, f_n] with f_n = 1 iff x_n is free.
FeatureMatrix make_features(const CSpaceGraph& graph, const PlanningProblem2D& problem);

/// Planner-tree features [start - x_n, goal - x_n].
FeatureMatrix relative_features(const Eigen::MatrixXd& positions, const Eigen::VectorXd& start,
                                const Eigen::VectorXd& goal);

/// Bijection of {0..N-1}. Applying it to rows maps row i to row mapping[i].
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<Index> mapping);

  static Permutation identity(Index n);
  static Permutation random(Index n, Rng& rng);

  Index size() const { return static_cast<Index>(mapping_.size()); }
  Index operator()(Index i) const { return mapping_[static_cast<std::size_t>(i)]; }
  const std::vector<Index>& mapping() const { return mapping_; }
  Permutation inverse() const;
  /// 0/1 matrix P with P^T x == permute_rows(x).
  Eigen::MatrixXd matrix() const;

 private:
  std::vector<Index> mapping_;
};

/// Row i of the result is row perm(i) of `x` (the product P^T x).
Eigen::MatrixXd permute_rows(const Eigen::MatrixXd& x, const Permutation& perm);

/// The relabeled operator P^T S P.
SparseShift permute_shift(const SparseShift& shift, const Permutation& perm);

FeatureMatrix permute_problem(const FeatureMatrix& features, const Permutation& perm);

nlohmann::json to_json(const CSpaceGraph& graph);
CSpaceGraph graph_from_json(const nlohmann::json& doc);

}  // namespace gnnmp
