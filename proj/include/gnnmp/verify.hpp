#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace gnnmp {

/// Outcome of one property suite. `metric` is the worst observed value and
/// passes when it is on the right side of `tolerance`.
struct SuiteResult {
  std::string name;
  bool passed = false;
  double metric = 0;
  double tolerance = 0;
  std::string detail;
  std::uint64_t counterexample_seed = 0;  // meaningful only on failure
  double seconds = 0;
};

nlohmann::json to_json(const SuiteResult& result);

/// Filter equivariance ||H(P'SP)(P'x) - P'H(S)x||_inf over random triples on
/// graphs with at most 50 nodes.
SuiteResult equivariance_suite(std::uint64_t seed, int trials = 200);

/// Readout invariance of full GNN and GAT regressors under node permutations.
SuiteResult prediction_invariance_suite(std::uint64_t seed, int trials = 200);

/// Layer types covered by the gradient suite.
const std::vector<std::string>& gradient_layer_names();

/// Central finite differences against every layer type on `fragments`
/// random fragments. `inject_fault` names a layer whose analytic gradient is
/// sign-flipped, to confirm the suite catches it.
SuiteResult gradient_suite(std::uint64_t seed, int fragments = 50,
                           const std::string& inject_fault = "");

/// shortest_path_between and bottleneck_nodes against exhaustive simple-path
/// enumeration on random graphs with at most 8 vertices.
SuiteResult search_oracle_suite(std::uint64_t seed, int graphs = 500);

/// Closed-form Gaussian KL against a Monte Carlo estimate for encoder outputs
/// of randomly initialized CVAE encoders. Metric is the worst relative error.
SuiteResult kl_suite(std::uint64_t seed, int outputs = 20, int samples = 100000);

/// Dispersion of 2000 Halton points against the mean over 20 uniform sets.
/// Metric is halton / mean_uniform and must stay below 1.
SuiteResult halton_dispersion_suite(std::uint64_t seed);

/// Relative energy drift of unforced RK4 trajectories over 10 s at dt = 0.01.
SuiteResult energy_drift_suite(std::uint64_t seed);

/// Largest distance from a probe lattice (`probes` per side) to its nearest point.
double dispersion(const Eigen::MatrixXd& points, int probes = 100);

struct VerifyOptions {
  std::uint64_t seed = 0;
  std::string inject_fault;
};

std::vector<SuiteResult> run_verify(const VerifyOptions& options);

}  // namespace gnnmp
