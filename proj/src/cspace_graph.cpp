#include "gnnmp/cspace_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gnnmp {

namespace {

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19};

double radical_inverse(std::uint64_t index, int base) {
  double inv_base = 1.0 / base;
  double scale = inv_base;
  double value = 0.0;
  while (index > 0) {
    value += static_cast<double>(index % base) * scale;
    index /= base;
    scale *= inv_base;
  }
  return value;
}

SparseShift adjacency_from_edges(Index n, const std::vector<Edge>& edges) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * edges.size());
  for (const Edge& e : edges) {
    triplets.emplace_back(e.u, e.v, 1.0);
    triplets.emplace_back(e.v, e.u, 1.0);
  }
  SparseShift shift(n, n);
  shift.setFromTriplets(triplets.begin(), triplets.end());
  return shift;
}

}  // namespace

std::string to_string(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::adjacency: return "adjacency";
    case ShiftKind::normalized: return "normalized";
    case ShiftKind::knn: return "knn";
  }
  return "adjacency";
}

ShiftKind shift_kind_from_string(const std::string& text) {
  if (text == "adjacency") return ShiftKind::adjacency;
  if (text == "normalized") return ShiftKind::normalized;
  if (text == "knn") return ShiftKind::knn;
  throw std::invalid_argument("unknown shift kind: " + text);
}

void finalize_graph(CSpaceGraph& graph) {
  const Index n = graph.size();
  graph.neighbors.assign(static_cast<std::size_t>(n), {});
  for (const Edge& e : graph.edges) {
    graph.neighbors[static_cast<std::size_t>(e.u)].push_back({e.v, e.weight});
    graph.neighbors[static_cast<std::size_t>(e.v)].push_back({e.u, e.weight});
  }
  graph.shift = adjacency_from_edges(n, graph.edges);
  graph.shift_kind = ShiftKind::adjacency;
  graph.knn_k = 0;
}

Eigen::MatrixXd halton_points(Index n, Index d) {
  if (n < 1) throw std::invalid_argument("halton_points needs n >= 1");
  if (d < 1 || d > 8) throw std::invalid_argument("halton_points supports 1 <= d <= 8");
  Eigen::MatrixXd points(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j)
      points(i, j) = radical_inverse(static_cast<std::uint64_t>(i + 1), kPrimes[j]);
  return points;
}

CSpaceGraph build_r_disc_graph(const Eigen::MatrixXd& points, double radius,
                               const World2D* world) {
  if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
  if (world != nullptr && points.cols() != 2)
    throw std::invalid_argument("world-aware graphs need 2-D points");
  CSpaceGraph graph;
  graph.positions = points;
  const Index n = points.rows();
  const double r2 = radius * radius;
  for (Index u = 0; u < n; ++u) {
    for (Index v = u + 1; v < n; ++v) {
      const double dist2 = (points.row(u) - points.row(v)).squaredNorm();
      if (dist2 > r2) continue;
      if (world != nullptr &&
          !segment_free(*world, points.row(u).transpose(), points.row(v).transpose()))
        continue;
      graph.edges.push_back({u, v, std::sqrt(dist2)});
    }
  }
  finalize_graph(graph);
  return graph;
}

CSpaceGraph restrict_to_world(const CSpaceGraph& graph, const World2D& world, double step) {
  if (graph.dim() != 2) throw std::invalid_argument("world-aware graphs need 2-D points");
  CSpaceGraph out;
  out.positions = graph.positions;
  std::vector<char> free(static_cast<std::size_t>(graph.size()));
  for (Index i = 0; i < graph.size(); ++i)
    free[static_cast<std::size_t>(i)] = is_free(world, graph.positions.row(i).transpose());
  for (const Edge& e : graph.edges) {
    if (!free[static_cast<std::size_t>(e.u)] || !free[static_cast<std::size_t>(e.v)]) continue;
    if (segment_free(world, graph.positions.row(e.u).transpose(),
                     graph.positions.row(e.v).transpose(), step))
      out.edges.push_back(e);
  }
  finalize_graph(out);
  return out;
}

SparseShift build_knn_shift(const Eigen::MatrixXd& points, Index k) {
  const Index n = points.rows();
  if (k < 1 || k >= n) throw std::invalid_argument("knn needs 1 <= k < N");
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n * k));
  std::vector<std::pair<double, Index>> candidates;
  for (Index i = 0; i < n; ++i) {
    candidates.clear();
    for (Index j = 0; j < n; ++j)
      if (j != i) candidates.emplace_back((points.row(i) - points.row(j)).squaredNorm(), j);
    std::partial_sort(candidates.begin(), candidates.begin() + k, candidates.end());
    for (Index c = 0; c < k; ++c) triplets.emplace_back(i, candidates[c].second, 1.0);
  }
  SparseShift shift(n, n);
  shift.setFromTriplets(triplets.begin(), triplets.end());
  return shift;
}

double spectral_radius_estimate(const SparseShift& shift, int iterations) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(shift.cols());
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd next = shift * v;
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    estimate = norm / v.norm();
    v = next / norm;
  }
  return estimate;
}

SparseShift normalize_shift(const SparseShift& shift, int iterations) {
  const double lambda = spectral_radius_estimate(shift, iterations);
  if (lambda == 0.0) return shift;
  return shift / lambda;
}

void use_normalized_shift(CSpaceGraph& graph) {
  graph.shift = normalize_shift(adjacency_from_edges(graph.size(), graph.edges));
  graph.shift_kind = ShiftKind::normalized;
  graph.knn_k = 0;
}

void use_knn_shift(CSpaceGraph& graph, Index k) {
  graph.shift = build_knn_shift(graph.positions, k);
  graph.shift_kind = ShiftKind::knn;
  graph.knn_k = k;
}

FeatureMatrix make_features(const CSpaceGraph& graph, const PlanningProblem2D& problem) {
  if (graph.dim() != 2) throw std::invalid_argument("2-D features need 2-D positions");
  const Index n = graph.size();
  FeatureMatrix x(n, 5);
  for (Index i = 0; i < n; ++i) {
    const Point2 p = graph.positions.row(i).transpose();
    x.row(i).segment<2>(0) = (problem.start - p).transpose();
    x.row(i).segment<2>(2) = (problem.goal - p).transpose();
    x(i, 4) = is_free(problem.world, p) ? 1.0 : 0.0;
  }
  return x;
}

FeatureMatrix relative_features(const Eigen::MatrixXd& positions, const Eigen::VectorXd& start,
                                const Eigen::VectorXd& goal) {
  const Index d = positions.cols();
  FeatureMatrix x(positions.rows(), 2 * d);
  x.leftCols(d) = (-positions).rowwise() + start.transpose();
  x.rightCols(d) = (-positions).rowwise() + goal.transpose();
  return x;
}

Permutation::Permutation(std::vector<Index> mapping) : mapping_(std::move(mapping)) {
  std::vector<char> seen(mapping_.size(), 0);
  for (Index m : mapping_) {
    if (m < 0 || m >= size() || seen[static_cast<std::size_t>(m)])
      throw std::invalid_argument("mapping is not a bijection");
    seen[static_cast<std::size_t>(m)] = 1;
  }
}

Permutation Permutation::identity(Index n) {
  std::vector<Index> mapping(static_cast<std::size_t>(n));
  std::iota(mapping.begin(), mapping.end(), Index{0});
  return Permutation(std::move(mapping));
}

Permutation Permutation::random(Index n, Rng& rng) {
  std::vector<Index> mapping(static_cast<std::size_t>(n));
  std::iota(mapping.begin(), mapping.end(), Index{0});
  std::shuffle(mapping.begin(), mapping.end(), rng);
  return Permutation(std::move(mapping));
}

Permutation Permutation::inverse() const {
  std::vector<Index> inv(mapping_.size());
  for (std::size_t i = 0; i < mapping_.size(); ++i)
    inv[static_cast<std::size_t>(mapping_[i])] = static_cast<Index>(i);
  return Permutation(std::move(inv));
}

Eigen::MatrixXd Permutation::matrix() const {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(size(), size());
  for (Index i = 0; i < size(); ++i) p((*this)(i), i) = 1.0;
  return p;
}

Eigen::MatrixXd permute_rows(const Eigen::MatrixXd& x, const Permutation& perm) {
  if (perm.size() != x.rows()) throw std::domain_error("permutation length mismatch");
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) out.row(i) = x.row(perm(i));
  return out;
}

SparseShift permute_shift(const SparseShift& shift, const Permutation& perm) {
  if (perm.size() != shift.rows() || shift.rows() != shift.cols())
    throw std::domain_error("permutation length mismatch");
  const Permutation inv = perm.inverse();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(shift.nonZeros()));
  for (Index r = 0; r < shift.outerSize(); ++r)
    for (SparseShift::InnerIterator it(shift, r); it; ++it)
      triplets.emplace_back(inv(it.row()), inv(it.col()), it.value());
  SparseShift out(shift.rows(), shift.cols());
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

FeatureMatrix permute_problem(const FeatureMatrix& features, const Permutation& perm) {
  return permute_rows(features, perm);
}

nlohmann::json to_json(const CSpaceGraph& graph) {
  nlohmann::json doc;
  doc["positions"] = nlohmann::json::array();
  for (Index i = 0; i < graph.size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < graph.dim(); ++j) row.push_back(graph.positions(i, j));
    doc["positions"].push_back(row);
  }
  doc["edges"] = nlohmann::json::array();
  doc["weights"] = nlohmann::json::array();
  for (const Edge& e : graph.edges) {
    doc["edges"].push_back({e.u, e.v});
    doc["weights"].push_back(e.weight);
  }
  doc["shift_kind"] = to_string(graph.shift_kind);
  if (graph.shift_kind == ShiftKind::knn) doc["knn_k"] = graph.knn_k;
  return doc;
}

CSpaceGraph graph_from_json(const nlohmann::json& doc) {
  CSpaceGraph graph;
  const auto& rows = doc.at("positions");
  const Index n = static_cast<Index>(rows.size());
  const Index d = n > 0 ? static_cast<Index>(rows[0].size()) : 0;
  graph.positions.resize(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) graph.positions(i, j) = rows[i][j].get<double>();
  const auto& edges = doc.at("edges");
  const auto& weights = doc.at("weights");
  if (edges.size() != weights.size()) throw std::invalid_argument("edges/weights length mismatch");
  for (std::size_t i = 0; i < edges.size(); ++i)
    graph.edges.push_back({edges[i][0].get<Index>(), edges[i][1].get<Index>(),
                           weights[i].get<double>()});
  finalize_graph(graph);
  switch (shift_kind_from_string(doc.at("shift_kind").get<std::string>())) {
    case ShiftKind::adjacency: break;
    case ShiftKind::normalized: use_normalized_shift(graph); break;
    case ShiftKind::knn: use_knn_shift(graph, doc.at("knn_k").get<Index>()); break;
  }
  return graph;
}

}  // namespace gnnmp
