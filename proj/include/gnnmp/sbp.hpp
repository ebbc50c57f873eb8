#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "gnnmp/cspace_graph.hpp"
#include "gnnmp/dynamics.hpp"
#include "gnnmp/models.hpp"
#include "gnnmp/rng.hpp"

namespace gnnmp {

/// Box-bounded state space. Learned samplers work in unit coordinates where
/// every dimension spans [-1, 1]; angular dimensions wrap.
struct StateSpace {
  Eigen::VectorXd lower, upper;
  std::vector<bool> wraps;

  Index dim() const { return lower.size(); }
  Eigen::VectorXd half_range() const { return 0.5 * (upper - lower); }
  Eigen::VectorXd to_unit(const Eigen::VectorXd& x) const;
  Eigen::VectorXd from_unit(const Eigen::VectorXd& u) const;
  /// a - b, wrapped on angular dimensions.
  Eigen::VectorXd difference(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
  /// Clamps to the box and wraps angular dimensions.
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
  Eigen::VectorXd uniform(Rng& rng) const;

  static StateSpace pendulum(const PendulumParams& params = {});
  static StateSpace arm();
};

/// Time-varying planner graph: each node links to its m nearest nodes in
/// unit coordinates (ties by lower index), kept up to date as nodes arrive.
class TreeGraph {
 public:
  explicit TreeGraph(int neighbors = 5) : m_(neighbors) {}

  void add(const Eigen::VectorXd& unit_position);
  Index size() const { return static_cast<Index>(positions_.size()); }
  int neighbors() const { return m_; }
  /// Binary k-NN operator with k = min(m, N-1), scaled by 1/k.
  SparseShift shift() const;
  /// Unscaled binary k-NN operator.
  SparseShift binary_shift() const;
  Eigen::MatrixXd positions() const;

 private:
  int m_;
  std::vector<Eigen::VectorXd> positions_;
  std::vector<std::vector<std::pair<double, Index>>> nearest_;
};

/// [start - x_n, goal - x_n] per node, in unit scale with wrapped angles.
FeatureMatrix tree_features(const StateSpace& space, const std::vector<Eigen::VectorXd>& nodes,
                            const Eigen::VectorXd& start, const Eigen::VectorXd& goal);

enum class SamplerKind { uniform, gnn, gnn_cvae };
std::string to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(const std::string& text);

/// Sampling distribution for tree growth. Learned kinds draw around the
/// model output; with probability `exploration` the draw is uniform instead.
/// Holds its own model copy, so one sampler serves one planning run at a time.
struct SamplerModel {
  SamplerKind kind = SamplerKind::uniform;
  std::shared_ptr<GnnRegressor> gnn;
  std::shared_ptr<GnnCvae> cvae;
  double exploration = 0.5;
  /// Gaussian spread around a GNN prediction, in unit coordinates.
  double spread = 0.1;

  static SamplerModel uniform() { return {}; }
  /// Deep copy, safe to hand to another thread.
  SamplerModel clone() const;
  /// Model prediction (unit coordinates) for the graph and features.
  Eigen::VectorXd predict(const SparseShift& shift, const FeatureMatrix& features, Rng& rng) const;
};

/// The time-varying graph a learned sampler conditions on: x_init, the
/// initial local samples, then every state the tree adds.
class SamplerGraph {
 public:
  SamplerGraph(const StateSpace& space, Eigen::VectorXd start, Eigen::VectorXd goal,
               int neighbors);

  void add(const Eigen::VectorXd& state);
  /// Next growth target from the sampler given the current graph. Model
  /// predictions join the graph; uniform exploration draws do not.
  Eigen::VectorXd draw(const SamplerModel& sampler, Rng& rng);
  const std::vector<Eigen::VectorXd>& nodes() const { return nodes_; }
  FeatureMatrix features() const;
  SparseShift shift() const { return graph_.shift(); }

 private:
  StateSpace space_;
  Eigen::VectorXd start_, goal_;
  std::vector<Eigen::VectorXd> nodes_;
  TreeGraph graph_;
};

struct PlannerOptions {
  int max_iters = 5000;
  int graph_neighbors = 5;
  int initial_samples = 5;
  double initial_sigma = 0.1;  // fraction of each dimension's range
  // pendulum
  double goal_tol_theta = 0.2;
  double goal_tol_omega = 0.5;
  double extend_duration = 0.25;
  double omega_weight = 0.1;
  // arm
  double arm_step = 0.1;
  int arm_interpolation = 20;
  double arm_goal_tol = 0.1;
  int arm_obstacles = 8;
};

struct PlannerTrace {
  bool success = false;
  int iterations = 0;
  int nodes_expanded = 0;
  long collision_checks = 0;
  double path_cost = 0;
  double wall_ms = 0;
  int initial_size = 0;
  std::vector<Eigen::VectorXd> nodes;
  std::vector<int> parent;           // -1 for roots
  std::vector<double> controls;      // control into each node (pendulum)
  std::vector<Eigen::VectorXd> path;
  std::vector<double> path_controls; // path_controls[i] drives path[i] -> path[i+1]
};

class PlanningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- problems ---------------------------------------------------------------

struct PendulumProblem {
  PendulumState start;
  PendulumState goal;
};

/// Start hanging near the bottom, goal near the upright position.
PendulumProblem generate_pendulum_problem(std::uint64_t seed);

struct ArmProblem {
  ArmScene scene;
  ArmConfig start = ArmConfig::Zero();
  ArmConfig goal = ArmConfig::Zero();
};

ArmProblem generate_arm_problem(const ArmScene& scene, std::uint64_t seed);

// --- planners ---------------------------------------------------------------

/// x_init plus m valid states from a Gaussian around it (sigma = fraction of
/// each dimension's range), rejection-sampled with `valid`.
PlannerTrace initialize_online_graph(const StateSpace& space, const Eigen::VectorXd& x_init,
                                     std::uint64_t seed, int m, double sigma_fraction,
                                     const std::function<bool(const Eigen::VectorXd&)>& valid,
                                     int rejection_budget = 10000);

/// Wrapped-angle distance plus omega_weight * |delta omega|.
double pendulum_metric(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double omega_weight);

/// Kinodynamic RRT for pendulum swing-up.
PlannerTrace rrt_plan(const PendulumProblem& problem, const SamplerModel& sampler,
                      std::uint64_t seed, const PlannerOptions& options = {},
                      const PendulumParams& params = {});

/// Bidirectional RRT with greedy connect for the planar arm.
PlannerTrace birrt_plan(const ArmProblem& problem, const SamplerModel& sampler,
                        std::uint64_t seed, const PlannerOptions& options = {});

/// Re-integrates path_controls from path[0]; returns the largest deviation
/// from the stored path states.
double replay_error(const PlannerTrace& trace, const PlannerOptions& options = {},
                    const PendulumParams& params = {});

// --- offline sampler data ---------------------------------------------------

enum class PlannerTask { pendulum, arm6 };

/// One prefix record: the graph is the path prefix (x_init first), the label
/// is the next path state.
struct SamplerRecord {
  int problem_id = 0;
  Eigen::VectorXd start, goal;
  std::vector<Eigen::VectorXd> prefix;
  Eigen::VectorXd label;
};

struct SamplerDataset {
  PlannerTask task = PlannerTask::pendulum;
  std::vector<SamplerRecord> records;
  int attempted = 0;
  int solved = 0;
};

struct OfflineOptions {
  PlannerOptions planner;
  std::vector<std::uint64_t> arm_scene_seeds = {101, 202};
  int jobs = 1;
};

/// Solves generated problems with the uniform sampler and turns each path of
/// L states into L-1 prefix records. Throws PlanningError when nothing is
/// solved.
SamplerDataset collect_offline_dataset(PlannerTask task, int n_problems, std::uint64_t seed,
                                       const OfflineOptions& options = {});

/// Records from one solved path (exposed for testing).
std::vector<SamplerRecord> path_records(int problem_id, const std::vector<Eigen::VectorXd>& path,
                                        const Eigen::VectorXd& start, const Eigen::VectorXd& goal);

/// Graph samples (unit-coordinate labels) for training a sampler model.
std::vector<GraphSample> sampler_training_samples(const StateSpace& space,
                                                  const std::vector<SamplerRecord>& records,
                                                  int graph_neighbors);

nlohmann::json to_json(const SamplerRecord& record);
SamplerRecord sampler_record_from_json(const nlohmann::json& doc);

nlohmann::json trace_record(const PlannerTrace& trace, const std::string& problem_id,
                            const std::string& sampler, std::uint64_t seed, bool with_timing);

}  // namespace gnnmp
