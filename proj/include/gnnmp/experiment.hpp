#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnnmp/models.hpp"
#include "gnnmp/sbp.hpp"
#include "gnnmp/verify.hpp"

namespace gnnmp {

inline constexpr int kArtifactFormatVersion = 1;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Task { critical2d, pendulum, arm6 };
std::string to_string(Task task);
Task task_from_string(const std::string& text);

struct DatasetConfig {
  int n_problems = 400;
  int min_walls = 1;
  int max_walls = 2;
  double corridor_width = 0.08;
  int max_labels = 3;
  int graph_nodes = 2000;
  double graph_radius = 0.04;  // mean degree near 10 at 2000 nodes
  std::string shift = "normalized";
  int knn_k = 10;
  std::vector<std::uint64_t> arm_scene_seeds = {101, 202};
};

struct TrainConfig {
  int epochs = 20;
  int batch_size = 8;
  double learning_rate = 1e-3;
  int latent_samples = 1;
  std::string resume;  // checkpoint to continue from
};

struct EvalConfig {
  int n_blobs = 6;
  double blob_radius = 0.06;
  int problems = 50;           // held-out planning problems
  std::uint64_t test_scene_seed = 303;
};

struct PlannerConfig {
  PlannerOptions options;
  double exploration = 0.5;
  double spread = 0.1;
};

struct BenchConfig {
  int problems = 20;
  int seeds = 1;       // planner runs per problem
  bool timing = false; // wall-clock columns break byte-identical reruns
  int timing_epochs = 2;
};

struct PathsConfig {
  std::string dataset;     // default <out>/dataset.json
  std::string checkpoint;  // default <out>/checkpoint.json
};

struct ExperimentConfig {
  Task task = Task::critical2d;
  std::string model = "gnn";  // gnn, gat, gnn_cvae, uniform, baseline
  std::uint64_t seed = 0;
  int jobs = 1;
  DatasetConfig dataset;
  Architecture architecture;
  TrainConfig train;
  EvalConfig eval;
  PlannerConfig planner;
  BenchConfig bench;
  PathsConfig paths;
  std::string inject_fault;  // verify only: layer whose backward is sign-flipped
};

/// Parses a config document; missing keys keep their defaults, unknown keys
/// and invalid values throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// 16 hex digits of FNV-1a over the canonical config document.
std::string config_hash(const ExperimentConfig& config);

/// Input and output widths implied by the task.
Architecture task_architecture(const ExperimentConfig& config);

/// Dense graph for the critical-sample task.
CSpaceGraph dense_graph(const DatasetConfig& dataset);

// --- command reports ----------------------------------------------------------

struct GenerateReport {
  int attempted = 0;
  int problems = 0;
  std::size_t samples = 0;
  std::size_t train = 0, validation = 0, test = 0;
};

struct TrainReport {
  LossCurve curve;
  double seconds = 0;
};

struct AccuracyRow {
  std::string model;
  std::string condition;  // clean or corrupted
  int problems = 0;
  std::size_t samples = 0;
  double accuracy = 0;          // pooled over every label
  double problem_accuracy = 0;  // mean of per-problem accuracies
};

struct PlannerRun {
  int problem = 0;
  std::string sampler;
  std::uint64_t seed = 0;
  PlannerTrace trace;
};

struct PlannerSummary {
  std::string sampler;
  int runs = 0;
  double success_rate = 0;
  double median_nodes = 0;
  double median_collision_checks = 0;
  double median_cost = 0;  // over successful runs
};

struct EvalReport {
  std::vector<AccuracyRow> accuracy;
  std::vector<PlannerRun> runs;
  std::vector<PlannerSummary> summaries;
};

GenerateReport cmd_generate(const ExperimentConfig& config, const std::filesystem::path& out);
TrainReport cmd_train(const ExperimentConfig& config, const std::filesystem::path& out);
EvalReport cmd_eval(const ExperimentConfig& config, const std::filesystem::path& out);
/// One planning run (planner tasks) or one labeled problem (critical2d).
nlohmann::json cmd_plan(const ExperimentConfig& config, const std::filesystem::path& out);
std::vector<SuiteResult> cmd_verify(const ExperimentConfig& config, const std::filesystem::path& out);
EvalReport cmd_bench(const ExperimentConfig& config, const std::filesystem::path& out);

/// Median of a non-empty sample (mean of the middle pair for even sizes).
double median(std::vector<double> values);

std::vector<PlannerSummary> summarize(const std::vector<PlannerRun>& runs);

}  // namespace gnnmp
