// Command-line entry point: generate, train, eval, plan, verify, bench.
#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "gnnmp/experiment.hpp"

namespace {

using namespace gnnmp;

void print_report(const GenerateReport& r) {
  std::printf("attempted=%d problems=%d samples=%zu train=%zu validation=%zu test=%zu\n", r.attempted,
              r.problems, r.samples, r.train, r.validation, r.test);
}

void print_report(const TrainReport& r) {
  if (r.curve.train.empty()) return;
  std::printf("epochs=%zu train_loss=%.6g val_loss=%.6g seconds=%.2f\n", r.curve.train.size(),
              r.curve.train.back(), r.curve.validation.back(), r.seconds);
}

void print_report(const EvalReport& r) {
  for (const auto& a : r.accuracy)
    std::printf("%-9s %-9s problems=%d samples=%zu accuracy=%.4f problem_accuracy=%.4f\n", a.model.c_str(),
                a.condition.c_str(), a.problems, a.samples, a.accuracy, a.problem_accuracy);
  for (const auto& s : r.summaries)
    std::printf("%-9s runs=%d success=%.3f median_nodes=%.1f median_checks=%.1f median_cost=%.4g\n",
                s.sampler.c_str(), s.runs, s.success_rate, s.median_nodes, s.median_collision_checks,
                s.median_cost);
}

bool print_report(const std::vector<SuiteResult>& results) {
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%-4s %-22s metric=%.3e tolerance=%.1e %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                r.metric, r.tolerance, r.detail.c_str());
    if (!r.passed) std::printf("     counterexample seed %llu\n", static_cast<unsigned long long>(r.counterexample_seed));
    ok = ok && r.passed;
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GNN sampling toolkit for motion planning"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "root seed (overrides the config)");
  app.add_option("--jobs", jobs, "concurrent cells (overrides the config)")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "output directory");

  const char* names[] = {"generate", "train", "eval", "plan", "verify", "bench"};
  const char* help[] = {"generate a dataset", "train a model", "evaluate a checkpoint",
                        "run a single planning query", "run the property suites", "run benchmark sweeps"};
  for (int i = 0; i < 6; ++i) app.add_subcommand(names[i], help[i])->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    ExperimentConfig config = config_path.empty() ? config_from_json(nlohmann::json::object())
                                                   : load_config(config_path);
    if (seed) config.seed = *seed;
    if (jobs) config.jobs = *jobs;
    const std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);

    if (command == "generate") print_report(cmd_generate(config, out));
    else if (command == "train") print_report(cmd_train(config, out));
    else if (command == "eval") print_report(cmd_eval(config, out));
    else if (command == "plan") {
      const auto doc = cmd_plan(config, out);
      if (doc.contains("trace")) std::cout << doc["trace"].dump() << "\n";
      else std::cout << "feasible=" << doc["feasible"] << "\n";
    } else if (command == "verify") {
      if (!print_report(cmd_verify(config, out))) return 1;
    } else if (command == "bench") print_report(cmd_bench(config, out));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << command << " failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
