#include "gnnmp/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "gnnmp/parallel.hpp"
#include "gnnmp/search.hpp"

namespace gnnmp {

namespace fs = std::filesystem;

std::string to_string(Task task) {
  switch (task) {
    case Task::critical2d: return "critical2d";
    case Task::pendulum: return "pendulum";
    case Task::arm6: return "arm6";
  }
  return "critical2d";
}

Task task_from_string(const std::string& text) {
  if (text == "critical2d") return Task::critical2d;
  if (text == "pendulum") return Task::pendulum;
  if (text == "arm6") return Task::arm6;
  throw ConfigError("unknown task: " + text);
}

// --- config -------------------------------------------------------------------

namespace {

/// Reads keys from one config object and rejects any it did not read.
class Section {
 public:
  Section(const nlohmann::json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(label() + " must be an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!doc_.contains(key)) return;
    seen_.insert(key);
    try {
      out = doc_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("invalid value for " + qualified(key));
    }
  }

  const nlohmann::json* child(const std::string& key) {
    if (!doc_.contains(key)) return nullptr;
    seen_.insert(key);
    return &doc_.at(key);
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& item : doc_.items())
      if (!seen_.count(item.key())) throw ConfigError("unknown config key: " + qualified(item.key()));
  }

 private:
  std::string label() const { return path_.empty() ? "config" : path_; }

  const nlohmann::json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& doc) {
  ExperimentConfig c;
  Section top(doc, "");
  std::string task = to_string(c.task);
  top.get("task", task);
  c.task = task_from_string(task);
  top.get("model", c.model);
  top.get("seed", c.seed);
  top.get("jobs", c.jobs);
  top.get("inject_fault", c.inject_fault);

  if (const auto* d = top.child("dataset")) {
    Section s(*d, "dataset");
    s.get("n_problems", c.dataset.n_problems);
    s.get("min_walls", c.dataset.min_walls);
    s.get("max_walls", c.dataset.max_walls);
    s.get("corridor_width", c.dataset.corridor_width);
    s.get("max_labels", c.dataset.max_labels);
    s.get("graph_nodes", c.dataset.graph_nodes);
    s.get("graph_radius", c.dataset.graph_radius);
    s.get("shift", c.dataset.shift);
    s.get("knn_k", c.dataset.knn_k);
    s.get("arm_scene_seeds", c.dataset.arm_scene_seeds);
    s.finish();
  }
  if (const auto* d = top.child("architecture")) {
    Section s(*d, "architecture");
    s.get("width", c.architecture.width);
    s.get("layers", c.architecture.layers);
    s.get("order", c.architecture.order);
    s.get("head_width", c.architecture.head_width);
    s.get("latent_dim", c.architecture.latent_dim);
    s.finish();
  }
  if (const auto* d = top.child("train")) {
    Section s(*d, "train");
    s.get("epochs", c.train.epochs);
    s.get("batch_size", c.train.batch_size);
    s.get("learning_rate", c.train.learning_rate);
    s.get("latent_samples", c.train.latent_samples);
    s.get("resume", c.train.resume);
    s.finish();
  }
  if (const auto* d = top.child("eval")) {
    Section s(*d, "eval");
    s.get("n_blobs", c.eval.n_blobs);
    s.get("blob_radius", c.eval.blob_radius);
    s.get("problems", c.eval.problems);
    s.get("test_scene_seed", c.eval.test_scene_seed);
    s.finish();
  }
  if (const auto* d = top.child("planner")) {
    Section s(*d, "planner");
    PlannerOptions& o = c.planner.options;
    s.get("max_iters", o.max_iters);
    s.get("graph_neighbors", o.graph_neighbors);
    s.get("initial_samples", o.initial_samples);
    s.get("initial_sigma", o.initial_sigma);
    s.get("goal_tol_theta", o.goal_tol_theta);
    s.get("goal_tol_omega", o.goal_tol_omega);
    s.get("extend_duration", o.extend_duration);
    s.get("omega_weight", o.omega_weight);
    s.get("arm_step", o.arm_step);
    s.get("arm_interpolation", o.arm_interpolation);
    s.get("arm_goal_tol", o.arm_goal_tol);
    s.get("arm_obstacles", o.arm_obstacles);
    s.get("exploration", c.planner.exploration);
    s.get("spread", c.planner.spread);
    s.finish();
  }
  if (const auto* d = top.child("bench")) {
    Section s(*d, "bench");
    s.get("problems", c.bench.problems);
    s.get("seeds", c.bench.seeds);
    s.get("timing", c.bench.timing);
    s.get("timing_epochs", c.bench.timing_epochs);
    s.finish();
  }
  if (const auto* d = top.child("paths")) {
    Section s(*d, "paths");
    s.get("dataset", c.paths.dataset);
    s.get("checkpoint", c.paths.checkpoint);
    s.finish();
  }
  top.finish();

  static const std::set<std::string> models = {"gnn", "gat", "gnn_cvae", "uniform", "baseline"};
  require(models.count(c.model) > 0, "unknown model: " + c.model);
  require(c.jobs >= 1, "jobs must be at least 1");
  const DatasetConfig& ds = c.dataset;
  require(ds.n_problems >= 1, "dataset.n_problems must be at least 1");
  require(ds.min_walls >= 0 && ds.max_walls >= ds.min_walls, "invalid wall count range");
  require(ds.corridor_width > 0 && ds.corridor_width < 1, "corridor_width must be in (0, 1)");
  require(ds.max_labels >= 0, "max_labels must be non-negative");
  require(ds.graph_nodes >= 2, "graph_nodes must be at least 2");
  require(ds.graph_radius > 0, "graph_radius must be positive");
  require(ds.shift == "adjacency" || ds.shift == "normalized" || ds.shift == "knn",
          "dataset.shift must be adjacency, normalized or knn");
  require(ds.knn_k >= 1 && ds.knn_k < ds.graph_nodes, "knn_k must be in [1, graph_nodes)");
  require(!ds.arm_scene_seeds.empty(), "arm_scene_seeds must not be empty");
  const Architecture& a = c.architecture;
  require(a.width >= 1 && a.layers >= 1 && a.order >= 0 && a.head_width >= 1 && a.latent_dim >= 1,
          "invalid architecture");
  require(c.train.epochs >= 1, "train.epochs must be at least 1");
  require(c.train.batch_size >= 1, "train.batch_size must be at least 1");
  require(c.train.learning_rate > 0, "train.learning_rate must be positive");
  require(c.train.latent_samples >= 1, "train.latent_samples must be at least 1");
  require(c.eval.n_blobs >= 0 && c.eval.blob_radius > 0, "invalid blob settings");
  require(c.eval.problems >= 1, "eval.problems must be at least 1");
  const PlannerOptions& o = c.planner.options;
  require(o.max_iters >= 0 && o.graph_neighbors >= 1 && o.initial_samples >= 0 &&
              o.initial_sigma > 0 && o.goal_tol_theta > 0 && o.goal_tol_omega > 0 &&
              o.extend_duration > 0 && o.omega_weight >= 0 && o.arm_step > 0 &&
              o.arm_interpolation >= 1 && o.arm_goal_tol > 0 && o.arm_obstacles >= 0,
          "invalid planner settings");
  require(c.planner.exploration >= 0 && c.planner.exploration <= 1, "exploration must be in [0, 1]");
  require(c.planner.spread >= 0, "spread must be non-negative");
  require(c.bench.problems >= 1 && c.bench.seeds >= 1 && c.bench.timing_epochs >= 1,
          "invalid bench settings");
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  const PlannerOptions& o = c.planner.options;
  return {
      {"task", to_string(c.task)},
      {"model", c.model},
      {"seed", c.seed},
      {"jobs", c.jobs},
      {"inject_fault", c.inject_fault},
      {"dataset",
       {{"n_problems", c.dataset.n_problems},
        {"min_walls", c.dataset.min_walls},
        {"max_walls", c.dataset.max_walls},
        {"corridor_width", c.dataset.corridor_width},
        {"max_labels", c.dataset.max_labels},
        {"graph_nodes", c.dataset.graph_nodes},
        {"graph_radius", c.dataset.graph_radius},
        {"shift", c.dataset.shift},
        {"knn_k", c.dataset.knn_k},
        {"arm_scene_seeds", c.dataset.arm_scene_seeds}}},
      {"architecture",
       {{"width", c.architecture.width},
        {"layers", c.architecture.layers},
        {"order", c.architecture.order},
        {"head_width", c.architecture.head_width},
        {"latent_dim", c.architecture.latent_dim}}},
      {"train",
       {{"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"latent_samples", c.train.latent_samples},
        {"resume", c.train.resume}}},
      {"eval",
       {{"n_blobs", c.eval.n_blobs},
        {"blob_radius", c.eval.blob_radius},
        {"problems", c.eval.problems},
        {"test_scene_seed", c.eval.test_scene_seed}}},
      {"planner",
       {{"max_iters", o.max_iters},
        {"graph_neighbors", o.graph_neighbors},
        {"initial_samples", o.initial_samples},
        {"initial_sigma", o.initial_sigma},
        {"goal_tol_theta", o.goal_tol_theta},
        {"goal_tol_omega", o.goal_tol_omega},
        {"extend_duration", o.extend_duration},
        {"omega_weight", o.omega_weight},
        {"arm_step", o.arm_step},
        {"arm_interpolation", o.arm_interpolation},
        {"arm_goal_tol", o.arm_goal_tol},
        {"arm_obstacles", o.arm_obstacles},
        {"exploration", c.planner.exploration},
        {"spread", c.planner.spread}}},
      {"bench",
       {{"problems", c.bench.problems},
        {"seeds", c.bench.seeds},
        {"timing", c.bench.timing},
        {"timing_epochs", c.bench.timing_epochs}}},
      {"paths", {{"dataset", c.paths.dataset}, {"checkpoint", c.paths.checkpoint}}},
  };
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(doc);
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string canonical = to_json(config).dump();
  std::uint64_t h = fnv1a(canonical);
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
  return out;
}

Architecture task_architecture(const ExperimentConfig& config) {
  Architecture a = config.architecture;
  a.kind = config.model == "gat" ? ModelKind::gat
           : config.model == "gnn_cvae" ? ModelKind::gnn_cvae
                                        : ModelKind::gnn;
  switch (config.task) {
    case Task::critical2d: a.input_dim = 5, a.output_dim = 2; break;
    case Task::pendulum: a.input_dim = 4, a.output_dim = 2; break;
    case Task::arm6: a.input_dim = 2 * kArmJoints, a.output_dim = kArmJoints; break;
  }
  return a;
}

CSpaceGraph dense_graph(const DatasetConfig& dataset) {
  CSpaceGraph g = build_r_disc_graph(halton_points(dataset.graph_nodes, 2), dataset.graph_radius);
  if (dataset.shift == "normalized") use_normalized_shift(g);
  else if (dataset.shift == "knn") use_knn_shift(g, dataset.knn_k);
  return g;
}

// --- artifact helpers -----------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& doc) { write_text(path, doc.dump(1) + "\n"); }

nlohmann::json read_json(const fs::path& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(what + " not found: " + path.string());
  return nlohmann::json::parse(in);
}

/// Every artifact starts from this stamp.
nlohmann::json stamp(const ExperimentConfig& config) {
  return {{"format_version", kArtifactFormatVersion},
          {"task", to_string(config.task)},
          {"seed", config.seed},
          {"config_hash", config_hash(config)}};
}

std::string csv_preamble(const ExperimentConfig& config) {
  return "# config_hash=" + config_hash(config) + " seed=" + std::to_string(config.seed) + "\n";
}

fs::path dataset_path(const ExperimentConfig& c, const fs::path& out) {
  return c.paths.dataset.empty() ? out / "dataset.json" : fs::path(c.paths.dataset);
}

fs::path checkpoint_path(const ExperimentConfig& c, const fs::path& out) {
  return c.paths.checkpoint.empty() ? out / "checkpoint.json" : fs::path(c.paths.checkpoint);
}

void persist_config(const ExperimentConfig& config, const fs::path& out) {
  nlohmann::json doc = stamp(config);
  doc["config"] = to_json(config);
  write_json(out / "config.json", doc);
}

bool learned(const std::string& model) {
  return model == "gnn" || model == "gat" || model == "gnn_cvae";
}

template <class Fn>
decltype(auto) with_model(ModelKind kind, Fn&& fn) {
  switch (kind) {
    case ModelKind::gat: return fn(std::type_identity<GatRegressor>{});
    case ModelKind::gnn_cvae: return fn(std::type_identity<GnnCvae>{});
    case ModelKind::gnn: break;
  }
  return fn(std::type_identity<GnnRegressor>{});
}

ModelKind checkpoint_kind(const nlohmann::json& doc) {
  return architecture_from_json(doc.at("architecture")).kind;
}

// --- critical2d data ------------------------------------------------------------

struct CriticalData {
  CSpaceGraph graph;
  std::shared_ptr<const SparseShift> shift;
  CriticalDataset dataset;
};

CriticalData load_critical(const ExperimentConfig& config, const fs::path& out) {
  const nlohmann::json doc = read_json(dataset_path(config, out), "dataset");
  if (doc.at("task").get<std::string>() != "critical2d")
    throw ConfigError("dataset was generated for another task");
  CriticalData data;
  data.graph = dense_graph(config.dataset);
  if (doc.at("graph_nodes").get<int>() != data.graph.size())
    throw ConfigError("dataset graph size does not match dataset.graph_nodes");
  data.shift = std::make_shared<const SparseShift>(data.graph.shift);
  data.dataset = dataset_from_records(doc.at("records").get<std::vector<nlohmann::json>>());
  data.dataset.attempted = doc.at("attempted").get<int>();
  return data;
}

GraphSample critical_sample(const CriticalData& data, const PlanningProblem2D& problem,
                            const std::vector<Point2>& labels) {
  GraphSample s;
  s.shift = data.shift;
  s.features = make_features(data.graph, problem);
  s.labels.resize(static_cast<Index>(labels.size()), 2);
  for (std::size_t l = 0; l < labels.size(); ++l) s.labels.row(static_cast<Index>(l)) = labels[l].transpose();
  return s;
}

std::vector<GraphSample> critical_split(const CriticalData& data, Split split, int jobs) {
  std::vector<const CriticalProblem*> chosen;
  for (const auto& p : data.dataset.problems)
    if (p.split == split) chosen.push_back(&p);
  return parallel_map(chosen.size(), jobs, [&](std::size_t i) {
    return critical_sample(data, chosen[i]->problem, chosen[i]->labels);
  });
}

// --- planner data ---------------------------------------------------------------

struct SamplerData {
  std::vector<GraphSample> train, validation;
};

StateSpace task_space(Task task) { return task == Task::arm6 ? StateSpace::arm() : StateSpace::pendulum(); }

SamplerData load_sampler_data(const ExperimentConfig& config, const fs::path& out) {
  const nlohmann::json doc = read_json(dataset_path(config, out), "dataset");
  if (doc.at("task").get<std::string>() != to_string(config.task))
    throw ConfigError("dataset was generated for another task");
  std::vector<SamplerRecord> records;
  std::set<int> ids;
  for (const auto& r : doc.at("records")) {
    records.push_back(sampler_record_from_json(r));
    ids.insert(records.back().problem_id);
  }
  // Problem-level split: 15% of solved problems validate.
  std::vector<int> order(ids.begin(), ids.end());
  Rng rng = make_stream(config.seed, "split");
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_val = (order.size() * 15 + 99) / 100;
  const std::set<int> validation(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<SamplerRecord> train_records, val_records;
  for (auto& r : records) (validation.count(r.problem_id) ? val_records : train_records).push_back(std::move(r));
  const StateSpace space = task_space(config.task);
  const int m = config.planner.options.graph_neighbors;
  return {sampler_training_samples(space, train_records, m),
          sampler_training_samples(space, val_records, m)};
}

// --- training -------------------------------------------------------------------

template <class Model>
TrainReport run_training(const ExperimentConfig& config, const fs::path& out,
                         const std::vector<GraphSample>& train_set,
                         const std::vector<GraphSample>& validation_set) {
  const auto started = std::chrono::steady_clock::now();
  std::unique_ptr<Trainer<Model>> trainer;
  if (!config.train.resume.empty()) {
    trainer = std::make_unique<Trainer<Model>>(
        Trainer<Model>::restore(read_json(config.train.resume, "checkpoint")));
  } else {
    const TrainOptions options{config.train.batch_size, config.train.learning_rate, config.seed,
                               config.train.latent_samples};
    trainer = std::make_unique<Trainer<Model>>(
        Model(task_architecture(config), stream_seed(config.seed, "model")), options);
  }
  trainer->train(train_set, validation_set, config.train.epochs);

  nlohmann::json doc = trainer->checkpoint();
  const nlohmann::json header = stamp(config);
  for (const auto& [key, value] : header.items()) doc[key] = value;
  write_json(checkpoint_path(config, out), doc);

  std::string csv = csv_preamble(config) + "epoch,train_loss,val_loss\n";
  const LossCurve& curve = trainer->curve();
  for (std::size_t e = 0; e < curve.train.size(); ++e)
    csv += std::to_string(e + 1) + "," + fmt(curve.train[e]) + "," + fmt(curve.validation[e]) + "\n";
  write_text(out / "loss_curve.csv", csv);
  return {curve, std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()};
}

// --- planner runs ---------------------------------------------------------------

SamplerModel load_sampler(const ExperimentConfig& config, const fs::path& out) {
  SamplerModel sampler;
  sampler.exploration = config.planner.exploration;
  sampler.spread = config.planner.spread;
  if (config.model == "uniform") return sampler;
  if (config.model != "gnn" && config.model != "gnn_cvae")
    throw ConfigError("model " + config.model + " cannot drive a planner");
  const nlohmann::json doc = read_json(checkpoint_path(config, out), "checkpoint");
  if (config.model == "gnn") {
    if (checkpoint_kind(doc) != ModelKind::gnn) throw ConfigError("checkpoint is not a gnn model");
    sampler.kind = SamplerKind::gnn;
    sampler.gnn = std::make_shared<GnnRegressor>(Trainer<GnnRegressor>::restore(doc).model());
  } else {
    if (checkpoint_kind(doc) != ModelKind::gnn_cvae) throw ConfigError("checkpoint is not a gnn_cvae model");
    sampler.kind = SamplerKind::gnn_cvae;
    sampler.cvae = std::make_shared<GnnCvae>(Trainer<GnnCvae>::restore(doc).model());
  }
  return sampler;
}

struct PlanningCell {
  int problem = 0;
  std::size_t sampler = 0;
  std::uint64_t seed = 0;
};

std::vector<PlannerRun> run_planner_cells(const ExperimentConfig& config,
                                          const std::vector<SamplerModel>& samplers,
                                          const std::vector<PlanningCell>& cells) {
  const PlannerOptions& options = config.planner.options;
  const ArmScene scene = generate_arm_scene(config.eval.test_scene_seed, options.arm_obstacles);
  return parallel_map(cells.size(), config.jobs, [&](std::size_t i) {
    const PlanningCell& cell = cells[i];
    const SamplerModel sampler = samplers[cell.sampler].clone();
    const std::uint64_t pseed = stream_seed(config.seed, "eval-problem", static_cast<std::uint64_t>(cell.problem));
    PlannerRun run{cell.problem, to_string(sampler.kind), cell.seed, {}};
    if (config.task == Task::pendulum)
      run.trace = rrt_plan(generate_pendulum_problem(pseed), sampler, cell.seed, options);
    else
      run.trace = birrt_plan(generate_arm_problem(scene, pseed), sampler, cell.seed, options);
    return run;
  });
}

void write_planner_csvs(const ExperimentConfig& config, const fs::path& out, const std::string& stem,
                        const std::vector<PlannerRun>& runs, const std::vector<PlannerSummary>& summaries,
                        bool timing) {
  std::string csv = csv_preamble(config) + "problem,sampler,seed,success,nodes,collision_checks,cost,ms\n";
  for (const auto& r : runs) {
    csv += std::to_string(r.problem) + "," + r.sampler + "," + std::to_string(r.seed) + "," +
           (r.trace.success ? "1" : "0") + "," + std::to_string(r.trace.nodes_expanded) + "," +
           std::to_string(r.trace.collision_checks) + "," + fmt(r.trace.path_cost) + "," +
           (timing ? fmt(r.trace.wall_ms) : "") + "\n";
  }
  write_text(out / (stem + ".csv"), csv);
  std::string summary = csv_preamble(config) +
                        "sampler,runs,success_rate,median_nodes,median_collision_checks,median_cost\n";
  for (const auto& s : summaries)
    summary += s.sampler + "," + std::to_string(s.runs) + "," + fmt(s.success_rate) + "," +
               fmt(s.median_nodes) + "," + fmt(s.median_collision_checks) + "," + fmt(s.median_cost) + "\n";
  write_text(out / (stem + "_summary.csv"), summary);
}

EvalReport planner_comparison(const ExperimentConfig& config, const fs::path& out, int problems,
                              int seeds, const std::string& stem, bool timing) {
  std::vector<SamplerModel> samplers = {SamplerModel::uniform()};
  samplers.front().exploration = config.planner.exploration;
  if (config.model != "uniform" && config.model != "baseline") samplers.push_back(load_sampler(config, out));
  std::vector<PlanningCell> cells;
  for (int p = 0; p < problems; ++p)
    for (int s = 0; s < seeds; ++s) {
      // Samplers share the run seed of each (problem, repeat) cell.
      const std::uint64_t seed = stream_seed(config.seed, "eval-run", static_cast<std::uint64_t>(p * seeds + s));
      for (std::size_t k = 0; k < samplers.size(); ++k) cells.push_back({p, k, seed});
    }
  EvalReport report;
  report.runs = run_planner_cells(config, samplers, cells);
  report.summaries = summarize(report.runs);
  write_planner_csvs(config, out, stem, report.runs, report.summaries, timing);
  return report;
}

// --- critical2d evaluation ------------------------------------------------------

struct Scored {
  std::vector<Eigen::VectorXd> predictions, labels;
  double problem_accuracy_sum = 0;
  int problems = 0;
};

void score(Scored& s, const Eigen::VectorXd& prediction, const Eigen::MatrixXd& labels) {
  double mse = 0;
  for (Index l = 0; l < labels.rows(); ++l) {
    s.predictions.push_back(prediction);
    s.labels.push_back(labels.row(l).transpose());
    mse += (prediction - labels.row(l).transpose()).squaredNorm();
  }
  s.problem_accuracy_sum += std::max(0.0, 1.0 - mse / static_cast<double>(labels.rows()));
  ++s.problems;
}

AccuracyRow accuracy_row(const std::string& model, const std::string& condition, const Scored& s) {
  return {model, condition, s.problems, s.labels.size(), accuracy(s.predictions, s.labels),
          s.problem_accuracy_sum / s.problems};
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) throw std::domain_error("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<PlannerSummary> summarize(const std::vector<PlannerRun>& runs) {
  std::vector<std::string> order;
  for (const auto& r : runs)
    if (std::find(order.begin(), order.end(), r.sampler) == order.end()) order.push_back(r.sampler);
  std::vector<PlannerSummary> out;
  for (const auto& name : order) {
    PlannerSummary s;
    s.sampler = name;
    std::vector<double> nodes, checks, costs;
    int successes = 0;
    for (const auto& r : runs) {
      if (r.sampler != name) continue;
      ++s.runs;
      nodes.push_back(r.trace.nodes_expanded);
      checks.push_back(static_cast<double>(r.trace.collision_checks));
      if (r.trace.success) {
        ++successes;
        costs.push_back(r.trace.path_cost);
      }
    }
    s.success_rate = static_cast<double>(successes) / s.runs;
    s.median_nodes = median(nodes);
    s.median_collision_checks = median(checks);
    s.median_cost = costs.empty() ? std::nan("") : median(costs);
    out.push_back(s);
  }
  return out;
}

// --- commands -------------------------------------------------------------------

GenerateReport cmd_generate(const ExperimentConfig& config, const fs::path& out) {
  persist_config(config, out);
  GenerateReport report;
  nlohmann::json doc = stamp(config);
  if (config.task == Task::critical2d) {
    const CSpaceGraph graph = dense_graph(config.dataset);
    CriticalDatasetOptions options;
    options.min_walls = config.dataset.min_walls;
    options.max_walls = config.dataset.max_walls;
    options.corridor_width = config.dataset.corridor_width;
    options.max_labels = config.dataset.max_labels;
    options.jobs = config.jobs;
    const CriticalDataset dataset = build_dataset(config.dataset.n_problems, config.seed, graph, options);
    report.attempted = dataset.attempted;
    report.problems = static_cast<int>(dataset.problems.size());
    report.samples = dataset.sample_count();
    report.train = dataset.sample_count(Split::train);
    report.validation = dataset.sample_count(Split::validation);
    report.test = dataset.sample_count(Split::test);
    doc["graph_nodes"] = graph.size();
    doc["attempted"] = dataset.attempted;
    doc["records"] = dataset_records(dataset);
    nlohmann::json graph_doc = stamp(config);
    graph_doc["graph"] = to_json(graph);
    write_json(out / "graph.json", graph_doc);
  } else {
    OfflineOptions options;
    options.planner = config.planner.options;
    options.arm_scene_seeds = config.dataset.arm_scene_seeds;
    options.jobs = config.jobs;
    const SamplerDataset dataset =
        collect_offline_dataset(config.task == Task::pendulum ? PlannerTask::pendulum : PlannerTask::arm6,
                                config.dataset.n_problems, config.seed, options);
    report.attempted = dataset.attempted;
    report.problems = dataset.solved;
    report.samples = dataset.records.size();
    report.train = report.samples;
    doc["attempted"] = dataset.attempted;
    doc["solved"] = dataset.solved;
    doc["records"] = nlohmann::json::array();
    for (const auto& r : dataset.records) doc["records"].push_back(to_json(r));
  }
  write_text(dataset_path(config, out), doc.dump() + "\n");

  nlohmann::json manifest = stamp(config);
  manifest["attempted"] = report.attempted;
  manifest["problems"] = report.problems;
  manifest["samples"] = report.samples;
  if (config.task == Task::critical2d)
    manifest["splits"] = {{"train", report.train}, {"validation", report.validation}, {"test", report.test}};
  write_json(out / "manifest.json", manifest);
  return report;
}

TrainReport cmd_train(const ExperimentConfig& config, const fs::path& out) {
  if (!learned(config.model)) throw ConfigError("model " + config.model + " has nothing to train");
  if (config.task != Task::critical2d && config.model == "gat")
    throw ConfigError("gat samplers are not supported for planner tasks");
  persist_config(config, out);
  std::vector<GraphSample> train_set, validation_set;
  if (config.task == Task::critical2d) {
    const CriticalData data = load_critical(config, out);
    train_set = critical_split(data, Split::train, config.jobs);
    validation_set = critical_split(data, Split::validation, config.jobs);
  } else {
    SamplerData data = load_sampler_data(config, out);
    train_set = std::move(data.train);
    validation_set = std::move(data.validation);
  }
  return with_model(task_architecture(config).kind, [&](auto tag) {
    using Model = typename decltype(tag)::type;
    return run_training<Model>(config, out, train_set, validation_set);
  });
}

EvalReport cmd_eval(const ExperimentConfig& config, const fs::path& out) {
  persist_config(config, out);
  if (config.task != Task::critical2d)
    return planner_comparison(config, out, config.eval.problems, 1, "traces", false);

  const CriticalData data = load_critical(config, out);
  const ConstantPredictor baseline = fit_constant(critical_split(data, Split::train, config.jobs));
  std::vector<const CriticalProblem*> test;
  for (const auto& p : data.dataset.problems)
    if (p.split == Split::test) test.push_back(&p);
  if (test.empty()) throw DatasetError("dataset has no test problems");

  std::optional<nlohmann::json> checkpoint;
  if (learned(config.model)) checkpoint = read_json(checkpoint_path(config, out), "checkpoint");

  // Each test problem scored clean and with blobs that leave its labels free.
  struct ProblemScores {
    Eigen::MatrixXd labels;
    Eigen::VectorXd model_clean, model_corrupted;
  };
  const auto per_problem = parallel_map(test.size(), config.jobs, [&](std::size_t i) {
    const CriticalProblem& p = *test[i];
    PlanningProblem2D corrupted = p.problem;
    std::vector<Point2> keep = p.labels;
    keep.push_back(p.problem.start);
    keep.push_back(p.problem.goal);
    corrupted.world = corrupt_with_blobs(p.problem.world,
                                         stream_seed(config.seed, "blobs", static_cast<std::uint64_t>(p.id)),
                                         config.eval.n_blobs, config.eval.blob_radius, keep);
    const GraphSample clean = critical_sample(data, p.problem, p.labels);
    const GraphSample dirty = critical_sample(data, corrupted, p.labels);
    ProblemScores s{clean.labels, {}, {}};
    if (checkpoint) {
      with_model(checkpoint_kind(*checkpoint), [&](auto tag) {
        using Model = typename decltype(tag)::type;
        Model model = Trainer<Model>::restore(*checkpoint).model();
        s.model_clean = model.predict(*data.shift, clean.features);
        s.model_corrupted = model.predict(*data.shift, dirty.features);
      });
    }
    return s;
  });

  Scored base_clean, base_dirty, model_clean, model_dirty;
  for (const auto& s : per_problem) {
    score(base_clean, baseline.mean, s.labels);
    score(base_dirty, baseline.mean, s.labels);
    if (checkpoint) {
      score(model_clean, s.model_clean, s.labels);
      score(model_dirty, s.model_corrupted, s.labels);
    }
  }
  EvalReport report;
  report.accuracy.push_back(accuracy_row("baseline", "clean", base_clean));
  report.accuracy.push_back(accuracy_row("baseline", "corrupted", base_dirty));
  if (checkpoint) {
    const std::string name = to_string(checkpoint_kind(*checkpoint));
    report.accuracy.push_back(accuracy_row(name, "clean", model_clean));
    report.accuracy.push_back(accuracy_row(name, "corrupted", model_dirty));
  }
  std::string csv = csv_preamble(config) + "model,condition,problems,samples,accuracy,problem_accuracy\n";
  for (const auto& r : report.accuracy)
    csv += r.model + "," + r.condition + "," + std::to_string(r.problems) + "," + std::to_string(r.samples) +
           "," + fmt(r.accuracy) + "," + fmt(r.problem_accuracy) + "\n";
  write_text(out / "metrics.csv", csv);
  return report;
}

nlohmann::json cmd_plan(const ExperimentConfig& config, const fs::path& out) {
  persist_config(config, out);
  nlohmann::json doc = stamp(config);
  const std::uint64_t pseed = stream_seed(config.seed, "plan-problem");
  if (config.task == Task::critical2d) {
    const CSpaceGraph graph = dense_graph(config.dataset);
    const PlanningProblem2D problem =
        generate_problem(pseed, config.dataset.max_walls, config.dataset.corridor_width);
    const CSpaceGraph restricted = restrict_to_world(graph, problem.world);
    doc["world"] = to_json(problem.world);
    doc["x_init"] = {problem.start.x(), problem.start.y()};
    doc["x_goal"] = {problem.goal.x(), problem.goal.y()};
    const auto path = shortest_path(restricted, problem);
    doc["feasible"] = path.has_value();
    if (path) {
      doc["path"] = path->nodes;
      doc["cost"] = path->cost;
      nlohmann::json critical = nlohmann::json::array();
      for (Index v : bottleneck_nodes(restricted, *path))
        critical.push_back({graph.positions(v, 0), graph.positions(v, 1)});
      doc["critical"] = critical;
    }
    if (learned(config.model)) {
      const nlohmann::json checkpoint = read_json(checkpoint_path(config, out), "checkpoint");
      const FeatureMatrix x = make_features(graph, problem);
      with_model(checkpoint_kind(checkpoint), [&](auto tag) {
        using Model = typename decltype(tag)::type;
        Model model = Trainer<Model>::restore(checkpoint).model();
        const Eigen::VectorXd y = model.predict(graph.shift, x);
        doc["predicted_critical"] = {y(0), y(1)};
      });
    }
    write_json(out / "plan.json", doc);
    return doc;
  }

  const SamplerModel sampler = load_sampler(config, out);
  PlannerTrace trace;
  nlohmann::json start, goal;
  if (config.task == Task::pendulum) {
    const PendulumProblem problem = generate_pendulum_problem(pseed);
    trace = rrt_plan(problem, sampler, config.seed, config.planner.options);
    start = {problem.start.theta, problem.start.omega};
    goal = {problem.goal.theta, problem.goal.omega};
    doc["replay_error"] = replay_error(trace, config.planner.options);
  } else {
    const ArmScene scene = generate_arm_scene(config.eval.test_scene_seed, config.planner.options.arm_obstacles);
    const ArmProblem problem = generate_arm_problem(scene, pseed);
    trace = birrt_plan(problem, sampler, config.seed, config.planner.options);
    start = std::vector<double>(problem.start.data(), problem.start.data() + kArmJoints);
    goal = std::vector<double>(problem.goal.data(), problem.goal.data() + kArmJoints);
    doc["scene"] = to_json(scene);
  }
  doc["x_init"] = start;
  doc["x_goal"] = goal;
  doc["trace"] = trace_record(trace, "plan", to_string(sampler.kind), config.seed, false);
  doc["tree_size"] = trace.nodes.size();
  doc["path"] = nlohmann::json::array();
  for (const auto& state : trace.path) doc["path"].push_back(std::vector<double>(state.data(), state.data() + state.size()));
  doc["path_controls"] = trace.path_controls;
  write_json(out / "plan.json", doc);
  return doc;
}

std::vector<SuiteResult> cmd_verify(const ExperimentConfig& config, const fs::path& out) {
  persist_config(config, out);
  const auto results = run_verify({config.seed, config.inject_fault});
  nlohmann::json doc = stamp(config);
  doc["suites"] = nlohmann::json::array();
  bool passed = true;
  for (const auto& r : results) {
    nlohmann::json entry = to_json(r);
    entry.erase("seconds");  // keeps the report byte-identical across reruns
    doc["suites"].push_back(entry);
    passed = passed && r.passed;
  }
  doc["passed"] = passed;
  write_json(out / "verify.json", doc);
  return results;
}

EvalReport cmd_bench(const ExperimentConfig& config, const fs::path& out) {
  persist_config(config, out);
  if (config.task != Task::critical2d)
    return planner_comparison(config, out, config.bench.problems, config.bench.seeds, "bench",
                              config.bench.timing);

  // Per-epoch training cost of GNN and GAT at equal width.
  const CriticalData data = load_critical(config, out);
  const std::vector<GraphSample> train_set = critical_split(data, Split::train, config.jobs);
  std::string csv = csv_preamble(config) + "model,epoch,train_loss,seconds\n";
  for (const std::string model : {"gnn", "gat"}) {
    ExperimentConfig c = config;
    c.model = model;
    const TrainOptions options{config.train.batch_size, config.train.learning_rate, config.seed,
                               config.train.latent_samples};
    with_model(task_architecture(c).kind, [&](auto tag) {
      using Model = typename decltype(tag)::type;
      Trainer<Model> trainer(Model(task_architecture(c), stream_seed(config.seed, "model")), options);
      for (int e = 1; e <= config.bench.timing_epochs; ++e) {
        const auto started = std::chrono::steady_clock::now();
        trainer.train(train_set, {}, 1);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        csv += model + "," + std::to_string(e) + "," + fmt(trainer.curve().train.back()) + "," +
               (config.bench.timing ? fmt(seconds) : "") + "\n";
      }
    });
  }
  write_text(out / "bench.csv", csv);
  return {};
}

}  // namespace gnnmp
