#include "gnnmp/sbp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include "gnnmp/parallel.hpp"

namespace gnnmp {

// --- state space --------------------------------------------------------------

Eigen::VectorXd StateSpace::to_unit(const Eigen::VectorXd& x) const {
  return (2.0 * (x - lower).array() / (upper - lower).array() - 1.0).matrix();
}

Eigen::VectorXd StateSpace::from_unit(const Eigen::VectorXd& u) const {
  return (lower.array() + 0.5 * (u.array() + 1.0) * (upper - lower).array()).matrix();
}

Eigen::VectorXd StateSpace::difference(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  Eigen::VectorXd d = a - b;
  for (Index i = 0; i < d.size(); ++i)
    if (wraps[static_cast<std::size_t>(i)]) d(i) = wrap_angle(d(i));
  return d;
}

Eigen::VectorXd StateSpace::project(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out = x;
  for (Index i = 0; i < out.size(); ++i) {
    if (wraps[static_cast<std::size_t>(i)]) out(i) = wrap_angle(out(i));
    else out(i) = std::clamp(out(i), lower(i), upper(i));
  }
  return out;
}

Eigen::VectorXd StateSpace::uniform(Rng& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd x(dim());
  for (Index i = 0; i < dim(); ++i) x(i) = lower(i) + (upper(i) - lower(i)) * unit(rng);
  return x;
}

StateSpace StateSpace::pendulum(const PendulumParams& params) {
  StateSpace s;
  s.lower = Eigen::Vector2d(-std::numbers::pi, -params.max_speed);
  s.upper = Eigen::Vector2d(std::numbers::pi, params.max_speed);
  s.wraps = {true, false};
  return s;
}

StateSpace StateSpace::arm() {
  StateSpace s;
  s.lower = Eigen::VectorXd::Constant(kArmJoints, -std::numbers::pi);
  s.upper = Eigen::VectorXd::Constant(kArmJoints, std::numbers::pi);
  s.wraps.assign(kArmJoints, false);
  return s;
}

// --- tree graph -----------------------------------------------------------------

void TreeGraph::add(const Eigen::VectorXd& unit_position) {
  const Index idx = size();
  std::vector<std::pair<double, Index>> mine;
  mine.reserve(static_cast<std::size_t>(idx));
  for (Index j = 0; j < idx; ++j) {
    const double d2 = (positions_[static_cast<std::size_t>(j)] - unit_position).squaredNorm();
    mine.emplace_back(d2, j);
    auto& theirs = nearest_[static_cast<std::size_t>(j)];
    const std::pair<double, Index> entry{d2, idx};
    if (static_cast<int>(theirs.size()) < m_ || entry < theirs.back()) {
      theirs.insert(std::upper_bound(theirs.begin(), theirs.end(), entry), entry);
      if (static_cast<int>(theirs.size()) > m_) theirs.pop_back();
    }
  }
  const auto keep = std::min<std::size_t>(mine.size(), static_cast<std::size_t>(std::max(m_, 0)));
  std::partial_sort(mine.begin(), mine.begin() + static_cast<std::ptrdiff_t>(keep), mine.end());
  nearest_.emplace_back(mine.begin(), mine.begin() + static_cast<std::ptrdiff_t>(keep));
  positions_.push_back(unit_position);
}

SparseShift TreeGraph::binary_shift() const {
  const Index n = size();
  std::vector<Eigen::Triplet<double>> triplets;
  for (Index i = 0; i < n; ++i)
    for (const auto& [d2, j] : nearest_[static_cast<std::size_t>(i)]) triplets.emplace_back(i, j, 1.0);
  SparseShift shift(n, n);
  shift.setFromTriplets(triplets.begin(), triplets.end());
  return shift;
}

SparseShift TreeGraph::shift() const {
  const Index k = std::min<Index>(m_, std::max<Index>(size() - 1, 0));
  SparseShift s = binary_shift();
  if (k > 0) s /= static_cast<double>(k);
  return s;
}

Eigen::MatrixXd TreeGraph::positions() const {
  if (positions_.empty()) return {};
  Eigen::MatrixXd out(size(), positions_.front().size());
  for (Index i = 0; i < size(); ++i) out.row(i) = positions_[static_cast<std::size_t>(i)].transpose();
  return out;
}

FeatureMatrix tree_features(const StateSpace& space, const std::vector<Eigen::VectorXd>& nodes,
                            const Eigen::VectorXd& start, const Eigen::VectorXd& goal) {
  const Index d = space.dim();
  const Eigen::ArrayXd scale = space.half_range().array().inverse();
  FeatureMatrix x(static_cast<Index>(nodes.size()), 2 * d);
  for (Index n = 0; n < x.rows(); ++n) {
    const Eigen::VectorXd& node = nodes[static_cast<std::size_t>(n)];
    x.row(n).head(d) = (space.difference(start, node).array() * scale).matrix().transpose();
    x.row(n).tail(d) = (space.difference(goal, node).array() * scale).matrix().transpose();
  }
  return x;
}

// --- samplers -----------------------------------------------------------------

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::uniform: return "uniform";
    case SamplerKind::gnn: return "gnn";
    case SamplerKind::gnn_cvae: return "gnn_cvae";
  }
  return "uniform";
}

SamplerKind sampler_kind_from_string(const std::string& text) {
  if (text == "uniform") return SamplerKind::uniform;
  if (text == "gnn") return SamplerKind::gnn;
  if (text == "gnn_cvae") return SamplerKind::gnn_cvae;
  throw std::invalid_argument("unknown sampler: " + text);
}

SamplerModel SamplerModel::clone() const {
  SamplerModel out = *this;
  if (gnn) out.gnn = std::make_shared<GnnRegressor>(*gnn);
  if (cvae) out.cvae = std::make_shared<GnnCvae>(*cvae);
  return out;
}

Eigen::VectorXd SamplerModel::predict(const SparseShift& shift, const FeatureMatrix& features,
                                      Rng& rng) const {
  switch (kind) {
    case SamplerKind::gnn: {
      if (!gnn) throw PlanningError("gnn sampler without a model");
      Eigen::VectorXd u = gnn->predict(shift, features);
      std::normal_distribution<double> normal(0.0, spread);
      for (Index i = 0; i < u.size(); ++i) u(i) += normal(rng);
      return u;
    }
    case SamplerKind::gnn_cvae: {
      if (!cvae) throw PlanningError("gnn_cvae sampler without a model");
      std::normal_distribution<double> normal(0.0, 1.0);
      RowVector<double> tau(cvae->latent_dim());
      for (Index i = 0; i < tau.cols(); ++i) tau(i) = normal(rng);
      return cvae->decode(shift, features, tau).transpose();
    }
    case SamplerKind::uniform: break;
  }
  throw PlanningError("uniform sampler has no model prediction");
}

SamplerGraph::SamplerGraph(const StateSpace& space, Eigen::VectorXd start, Eigen::VectorXd goal,
                           int neighbors)
    : space_(space), start_(std::move(start)), goal_(std::move(goal)), graph_(neighbors) {}

void SamplerGraph::add(const Eigen::VectorXd& state) {
  nodes_.push_back(state);
  graph_.add(space_.to_unit(state));
}

FeatureMatrix SamplerGraph::features() const { return tree_features(space_, nodes_, start_, goal_); }

Eigen::VectorXd SamplerGraph::draw(const SamplerModel& sampler, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (sampler.kind == SamplerKind::uniform || unit(rng) < sampler.exploration)
    return space_.uniform(rng);
  const Eigen::VectorXd y = space_.project(space_.from_unit(sampler.predict(shift(), features(), rng)));
  add(y);
  return y;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::vector<int> root_path(const std::vector<int>& parent, int leaf) {
  std::vector<int> chain;
  for (int v = leaf; v != -1; v = parent[static_cast<std::size_t>(v)]) chain.push_back(v);
  std::reverse(chain.begin(), chain.end());
  return chain;
}

int extend_steps(const PlannerOptions& options, const PendulumParams& params) {
  return std::max(1, static_cast<int>(std::lround(options.extend_duration / params.dt)));
}

PendulumState integrate(PendulumState s, double torque, int steps, const PendulumParams& params) {
  for (int i = 0; i < steps; ++i) s = pendulum_step(s, torque, params.dt, params);
  return s;
}

}  // namespace

PendulumProblem generate_pendulum_problem(std::uint64_t seed) {
  Rng rng = make_stream(seed, "pendulum-problem");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  PendulumProblem p;
  p.start = {wrap_angle(-std::numbers::pi / 2 + 0.2 * unit(rng)), 0.3 * unit(rng)};
  p.goal = {wrap_angle(std::numbers::pi / 2 + 0.2 * unit(rng)), 0.3 * unit(rng)};
  return p;
}

ArmProblem generate_arm_problem(const ArmScene& scene, std::uint64_t seed) {
  Rng rng = make_stream(seed, "arm-problem");
  const StateSpace space = StateSpace::arm();
  ArmProblem p;
  p.scene = scene;
  auto draw = [&] {
    for (int attempt = 0; attempt < 100000; ++attempt) {
      const ArmConfig q = space.uniform(rng);
      if (arm_config_free(q, scene.link_lengths, scene.obstacles)) return q;
    }
    throw PlanningError("no free arm configuration found");
  };
  p.start = draw();
  p.goal = draw();
  return p;
}

PlannerTrace initialize_online_graph(const StateSpace& space, const Eigen::VectorXd& x_init,
                                     std::uint64_t seed, int m, double sigma_fraction,
                                     const std::function<bool(const Eigen::VectorXd&)>& valid,
                                     int rejection_budget) {
  if (m < 0) throw std::invalid_argument("initial sample count must be non-negative");
  PlannerTrace trace;
  trace.nodes.push_back(x_init);
  trace.parent.push_back(-1);
  trace.controls.push_back(0.0);
  Rng rng = make_stream(seed, "initial-graph");
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::VectorXd sigma = sigma_fraction * (space.upper - space.lower);
  int attempts = 0;
  while (static_cast<int>(trace.nodes.size()) < m + 1) {
    if (attempts++ >= rejection_budget) throw PlanningError("initial graph rejection budget exhausted");
    Eigen::VectorXd offset(space.dim());
    for (Index i = 0; i < offset.size(); ++i) offset(i) = sigma(i) * normal(rng);
    const Eigen::VectorXd candidate = x_init + offset;
    bool inside = true;
    for (Index i = 0; i < candidate.size(); ++i)
      if (!space.wraps[static_cast<std::size_t>(i)] &&
          (candidate(i) < space.lower(i) || candidate(i) > space.upper(i)))
        inside = false;
    if (!inside) continue;
    const Eigen::VectorXd state = space.project(candidate);
    if (!valid(state)) continue;
    trace.nodes.push_back(state);
    trace.parent.push_back(-1);
    trace.controls.push_back(0.0);
  }
  trace.initial_size = static_cast<int>(trace.nodes.size());
  return trace;
}

double pendulum_metric(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double omega_weight) {
  return std::abs(wrap_angle(a(0) - b(0))) + omega_weight * std::abs(a(1) - b(1));
}

PlannerTrace rrt_plan(const PendulumProblem& problem, const SamplerModel& sampler,
                      std::uint64_t seed, const PlannerOptions& options,
                      const PendulumParams& params) {
  const auto started = Clock::now();
  const StateSpace space = StateSpace::pendulum(params);
  const Eigen::VectorXd start = problem.start.vector();
  const Eigen::VectorXd goal = problem.goal.vector();

  PlannerTrace trace = initialize_online_graph(space, start, stream_seed(seed, "init"),
                                               options.initial_samples, options.initial_sigma,
                                               [](const Eigen::VectorXd&) { return true; });
  SamplerGraph guide(space, start, goal, options.graph_neighbors);
  for (const auto& node : trace.nodes) guide.add(node);
  // Only nodes connected to x_init by integrated edges can be extended, and
  // each control is applied at most once per node (a repeat would duplicate
  // an existing child).
  std::vector<int> extendable = {0};
  std::vector<unsigned> used(trace.nodes.size(), 0);
  constexpr unsigned kAllControls = 0b111;

  auto finish = [&](int leaf) {
    trace.success = true;
    for (int v : root_path(trace.parent, leaf)) {
      trace.path.push_back(trace.nodes[static_cast<std::size_t>(v)]);
      if (v != 0) trace.path_controls.push_back(trace.controls[static_cast<std::size_t>(v)]);
    }
    trace.path_cost = static_cast<double>(trace.path.size() - 1) * options.extend_duration;
  };

  if (pendulum_goal_reached(problem.start, problem.goal, options.goal_tol_theta,
                            options.goal_tol_omega)) {
    finish(0);
    trace.wall_ms = elapsed_ms(started);
    return trace;
  }

  const int steps = extend_steps(options, params);
  const double controls[] = {-params.max_torque, 0.0, params.max_torque};
  Rng rng = make_stream(seed, "sampler");
  for (int it = 0; it < options.max_iters; ++it) {
    trace.iterations = it + 1;
    const Eigen::VectorXd target = guide.draw(sampler, rng);
    int nearest = extendable.front();
    double best = std::numeric_limits<double>::infinity();
    for (int v : extendable) {
      if (used[static_cast<std::size_t>(v)] == kAllControls) continue;
      const double d = pendulum_metric(trace.nodes[static_cast<std::size_t>(v)], target,
                                       options.omega_weight);
      if (d < best) {
        best = d;
        nearest = v;
      }
    }
    const PendulumState from = PendulumState::from(trace.nodes[static_cast<std::size_t>(nearest)]);
    if (!std::isfinite(best)) break;  // every node exhausted
    PendulumState chosen;
    int chosen_control = 0;
    double chosen_dist = std::numeric_limits<double>::infinity();
    for (int c = 0; c < 3; ++c) {
      if (used[static_cast<std::size_t>(nearest)] & (1u << c)) continue;
      const PendulumState next = integrate(from, controls[c], steps, params);
      const double d = pendulum_metric(next.vector(), target, options.omega_weight);
      if (d < chosen_dist) {
        chosen_dist = d;
        chosen = next;
        chosen_control = c;
      }
    }
    used[static_cast<std::size_t>(nearest)] |= 1u << chosen_control;
    const int idx = static_cast<int>(trace.nodes.size());
    trace.nodes.push_back(chosen.vector());
    trace.parent.push_back(nearest);
    trace.controls.push_back(controls[chosen_control]);
    extendable.push_back(idx);
    used.push_back(0);
    ++trace.nodes_expanded;
    if (pendulum_goal_reached(chosen, problem.goal, options.goal_tol_theta, options.goal_tol_omega)) {
      finish(idx);
      break;
    }
  }
  trace.wall_ms = elapsed_ms(started);
  return trace;
}

double replay_error(const PlannerTrace& trace, const PlannerOptions& options,
                    const PendulumParams& params) {
  if (trace.path.empty()) return 0.0;
  const int steps = extend_steps(options, params);
  PendulumState s = PendulumState::from(trace.path.front());
  double worst = 0;
  for (std::size_t i = 0; i < trace.path_controls.size(); ++i) {
    s = integrate(s, trace.path_controls[i], steps, params);
    const Eigen::Vector2d stored = trace.path[i + 1];
    worst = std::max({worst, std::abs(wrap_angle(s.theta - stored(0))), std::abs(s.omega - stored(1))});
  }
  return worst;
}

namespace {

struct GrowthTree {
  PlannerTrace nodes;  // nodes, parents, initial size
  std::vector<int> extendable;
  std::optional<SamplerGraph> guide;  // features use (root, other root) as (start, goal)
};

}  // namespace

PlannerTrace birrt_plan(const ArmProblem& problem, const SamplerModel& sampler,
                        std::uint64_t seed, const PlannerOptions& options) {
  const auto started = Clock::now();
  const StateSpace space = StateSpace::arm();
  PlannerTrace trace;
  auto valid = [&](const Eigen::VectorXd& q) {
    ++trace.collision_checks;
    return arm_config_free(q, problem.scene.link_lengths, problem.scene.obstacles);
  };
  auto segment_valid = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (int i = 1; i <= options.arm_interpolation; ++i) {
      const double t = static_cast<double>(i) / options.arm_interpolation;
      if (!valid(a + t * (b - a))) return false;
    }
    return true;
  };

  const Eigen::VectorXd start = problem.start;
  const Eigen::VectorXd goal = problem.goal;
  if (!valid(start) || !valid(goal)) throw PlanningError("start or goal configuration in collision");

  GrowthTree trees[2];
  const Eigen::VectorXd roots[2] = {start, goal};
  for (int t = 0; t < 2; ++t) {
    trees[t].nodes = initialize_online_graph(space, roots[t], stream_seed(seed, "init", t),
                                             options.initial_samples, options.initial_sigma, valid);
    trees[t].guide.emplace(space, roots[t], roots[1 - t], options.graph_neighbors);
    for (const auto& node : trees[t].nodes.nodes) trees[t].guide->add(node);
    trees[t].extendable = {0};
  }

  auto add_node = [&](GrowthTree& tree, int parent, const Eigen::VectorXd& q) {
    const int idx = static_cast<int>(tree.nodes.nodes.size());
    tree.nodes.nodes.push_back(q);
    tree.nodes.parent.push_back(parent);
    tree.nodes.controls.push_back(0.0);
    tree.extendable.push_back(idx);
    return idx;
  };
  auto nearest_in = [&](const GrowthTree& tree, const Eigen::VectorXd& q) {
    int best_v = tree.extendable.front();
    double best = std::numeric_limits<double>::infinity();
    for (int v : tree.extendable) {
      const double d = (tree.nodes.nodes[static_cast<std::size_t>(v)] - q).squaredNorm();
      if (d < best) {
        best = d;
        best_v = v;
      }
    }
    return best_v;
  };
  enum class Step { trapped, advanced, reached };
  // One bounded step (max joint change arm_step) from the nearest node toward q.
  auto extend = [&](GrowthTree& tree, const Eigen::VectorXd& q, int& out) {
    const int near = nearest_in(tree, q);
    const Eigen::VectorXd& from = tree.nodes.nodes[static_cast<std::size_t>(near)];
    const Eigen::VectorXd delta = q - from;
    const double largest = delta.cwiseAbs().maxCoeff();
    const bool reaches = largest <= options.arm_step;
    const Eigen::VectorXd to = reaches ? q : Eigen::VectorXd(from + (options.arm_step / largest) * delta);
    if (largest == 0.0) {
      out = near;
      return Step::reached;
    }
    if (!segment_valid(from, to)) return Step::trapped;
    out = add_node(tree, near, to);
    return reaches ? Step::reached : Step::advanced;
  };

  auto finish = [&](int a_side, int a_leaf, int b_leaf) {
    trace.success = true;
    const int b_side = 1 - a_side;
    std::vector<int> a_chain = root_path(trees[a_side].nodes.parent, a_leaf);
    std::vector<int> b_chain = root_path(trees[b_side].nodes.parent, b_leaf);
    std::vector<Eigen::VectorXd> path;
    for (int v : a_chain) path.push_back(trees[a_side].nodes.nodes[static_cast<std::size_t>(v)]);
    // b_leaf coincides with a_leaf's configuration
    for (auto it = b_chain.rbegin() + 1; it != b_chain.rend(); ++it)
      path.push_back(trees[b_side].nodes.nodes[static_cast<std::size_t>(*it)]);
    if (a_side == 1) std::reverse(path.begin(), path.end());
    trace.path = std::move(path);
    for (std::size_t i = 0; i + 1 < trace.path.size(); ++i)
      trace.path_cost += (trace.path[i + 1] - trace.path[i]).norm();
  };

  if ((start - goal).norm() <= options.arm_goal_tol && segment_valid(start, goal)) {
    trace.success = true;
    trace.path = {start, goal};
    trace.path_cost = (goal - start).norm();
  }

  Rng rng = make_stream(seed, "sampler");
  for (int it = 0; it < options.max_iters && !trace.success; ++it) {
    trace.iterations = it + 1;
    const int a = it % 2;
    GrowthTree& tree_a = trees[a];
    GrowthTree& tree_b = trees[1 - a];
    const Eigen::VectorXd target = tree_a.guide->draw(sampler, rng);
    int new_a = -1;
    if (extend(tree_a, target, new_a) == Step::trapped) continue;
    const Eigen::VectorXd bridge = tree_a.nodes.nodes[static_cast<std::size_t>(new_a)];
    // Greedy connect of the other tree toward the new node.
    for (;;) {
      int new_b = -1;
      const Step step = extend(tree_b, bridge, new_b);
      if (step == Step::trapped) break;
      if (step == Step::reached) {
        finish(a, new_a, new_b);
        break;
      }
    }
  }

  for (int t = 0; t < 2; ++t) {
    trace.nodes_expanded += static_cast<int>(trees[t].nodes.nodes.size()) - trees[t].nodes.initial_size;
    trace.initial_size += trees[t].nodes.initial_size;
    for (std::size_t i = 0; i < trees[t].nodes.nodes.size(); ++i) {
      trace.nodes.push_back(trees[t].nodes.nodes[i]);
      const int p = trees[t].nodes.parent[i];
      trace.parent.push_back(p < 0 ? -1 : p + (t == 0 ? 0 : static_cast<int>(trees[0].nodes.nodes.size())));
      trace.controls.push_back(0.0);
    }
  }
  trace.wall_ms = elapsed_ms(started);
  return trace;
}

// --- offline data -------------------------------------------------------------

std::vector<SamplerRecord> path_records(int problem_id, const std::vector<Eigen::VectorXd>& path,
                                        const Eigen::VectorXd& start, const Eigen::VectorXd& goal) {
  std::vector<SamplerRecord> out;
  for (std::size_t p = 0; p + 1 < path.size(); ++p) {
    SamplerRecord r;
    r.problem_id = problem_id;
    r.start = start;
    r.goal = goal;
    r.prefix.assign(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(p + 1));
    r.label = path[p + 1];
    out.push_back(std::move(r));
  }
  return out;
}

SamplerDataset collect_offline_dataset(PlannerTask task, int n_problems, std::uint64_t seed,
                                       const OfflineOptions& options) {
  if (n_problems < 0) throw std::invalid_argument("n_problems must be non-negative");
  std::vector<ArmScene> scenes;
  if (task == PlannerTask::arm6)
    for (std::uint64_t s : options.arm_scene_seeds)
      scenes.push_back(generate_arm_scene(s, options.planner.arm_obstacles));
  if (task == PlannerTask::arm6 && scenes.empty()) throw std::invalid_argument("no training scenes");

  auto solved = parallel_map(static_cast<std::size_t>(n_problems), options.jobs, [&](std::size_t i) {
    const int id = static_cast<int>(i);
    const std::uint64_t pseed = stream_seed(seed, "problem", i);
    const std::uint64_t run_seed = stream_seed(seed, "run", i);
    if (task == PlannerTask::pendulum) {
      const PendulumProblem problem = generate_pendulum_problem(pseed);
      const PlannerTrace t = rrt_plan(problem, SamplerModel::uniform(), run_seed, options.planner);
      if (!t.success) return std::vector<SamplerRecord>{};
      return path_records(id, t.path, problem.start.vector(), problem.goal.vector());
    }
    const ArmProblem problem = generate_arm_problem(scenes[i % scenes.size()], pseed);
    const PlannerTrace t = birrt_plan(problem, SamplerModel::uniform(), run_seed, options.planner);
    if (!t.success) return std::vector<SamplerRecord>{};
    return path_records(id, t.path, problem.start, problem.goal);
  });

  SamplerDataset dataset;
  dataset.task = task;
  dataset.attempted = n_problems;
  for (auto& records : solved) {
    // A solved single-state path yields no records but still counts as solved.
    if (!records.empty()) ++dataset.solved;
    for (auto& r : records) dataset.records.push_back(std::move(r));
  }
  if (n_problems > 0 && dataset.solved == 0) throw PlanningError("no offline problem was solved");
  return dataset;
}

std::vector<GraphSample> sampler_training_samples(const StateSpace& space,
                                                  const std::vector<SamplerRecord>& records,
                                                  int graph_neighbors) {
  std::vector<GraphSample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    TreeGraph graph(graph_neighbors);
    for (const auto& node : r.prefix) graph.add(space.to_unit(node));
    GraphSample s;
    s.shift = std::make_shared<const SparseShift>(graph.shift());
    s.features = tree_features(space, r.prefix, r.start, r.goal);
    s.labels = space.to_unit(r.label).transpose();
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd json_vec(const nlohmann::json& doc) {
  const auto values = doc.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
}

}  // namespace

nlohmann::json to_json(const SamplerRecord& record) {
  nlohmann::json prefix = nlohmann::json::array();
  for (const auto& p : record.prefix) prefix.push_back(vec_json(p));
  return {{"problem_id", record.problem_id},
          {"x_init", vec_json(record.start)},
          {"x_goal", vec_json(record.goal)},
          {"prefix", prefix},
          {"label", vec_json(record.label)}};
}

SamplerRecord sampler_record_from_json(const nlohmann::json& doc) {
  SamplerRecord r;
  r.problem_id = doc.at("problem_id").get<int>();
  r.start = json_vec(doc.at("x_init"));
  r.goal = json_vec(doc.at("x_goal"));
  for (const auto& p : doc.at("prefix")) r.prefix.push_back(json_vec(p));
  r.label = json_vec(doc.at("label"));
  return r;
}

nlohmann::json trace_record(const PlannerTrace& trace, const std::string& problem_id,
                            const std::string& sampler, std::uint64_t seed, bool with_timing) {
  nlohmann::json doc = {{"problem", problem_id},
                        {"sampler", sampler},
                        {"seed", seed},
                        {"success", trace.success},
                        {"nodes", trace.nodes_expanded},
                        {"collision_checks", trace.collision_checks},
                        {"cost", trace.path_cost}};
  if (with_timing) doc["ms"] = trace.wall_ms;
  return doc;
}

}  // namespace gnnmp
