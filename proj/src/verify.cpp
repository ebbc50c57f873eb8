#include "gnnmp/verify.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include "gnnmp/cspace_graph.hpp"
#include "gnnmp/dynamics.hpp"
#include "gnnmp/kernel/gradcheck.hpp"
#include "gnnmp/kernel/layers.hpp"
#include "gnnmp/models.hpp"
#include "gnnmp/rng.hpp"
#include "gnnmp/search.hpp"

namespace gnnmp {

nlohmann::json to_json(const SuiteResult& r) {
  nlohmann::json doc = {{"suite", r.name},        {"passed", r.passed},
                        {"metric", r.metric},     {"tolerance", r.tolerance},
                        {"detail", r.detail},     {"seconds", r.seconds}};
  if (!r.passed) doc["counterexample_seed"] = r.counterexample_seed;
  return doc;
}

namespace {

using kernel::Matrix;
using Clock = std::chrono::steady_clock;

Matrix<double> gaussian(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix<double> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

/// Random small graph operator: r-disc adjacency, its normalized form, or k-NN.
SparseShift random_shift(Index n, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd points(n, 2);
  for (Index i = 0; i < points.size(); ++i) points.data()[i] = unit(rng);
  switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0: return build_r_disc_graph(points, 0.25).shift;
    case 1: return normalize_shift(build_r_disc_graph(points, 0.35).shift);
    default: return build_knn_shift(points, std::min<Index>(3, n - 1));
  }
}

void randomize(const ParameterList<double>& params, Rng& rng, double scale) {
  for (auto* p : params) p->value = gaussian(p->value.rows(), p->value.cols(), rng, scale);
}

template <class Fn>
SuiteResult timed(const std::string& name, Fn fn) {
  const auto start = Clock::now();
  SuiteResult r = fn();
  r.name = name;
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

}  // namespace

SuiteResult equivariance_suite(std::uint64_t seed, int trials) {
  return timed("equivariance", [&] {
    SuiteResult r;
    r.tolerance = 1e-10;
    for (int t = 0; t < trials; ++t) {
      const std::uint64_t trial_seed = stream_seed(seed, "equivariance", static_cast<std::uint64_t>(t));
      Rng rng(trial_seed);
      const Index n = std::uniform_int_distribution<Index>(2, 50)(rng);
      const Index in = std::uniform_int_distribution<Index>(1, 4)(rng);
      const Index out = std::uniform_int_distribution<Index>(1, 4)(rng);
      const SparseShift s = random_shift(n, rng);
      const Matrix<double> x = gaussian(n, in, rng);
      const Permutation perm = Permutation::random(n, rng);
      const SparseShift ps = permute_shift(s, perm);
      const Matrix<double> px = permute_rows(x, perm);

      Matrix<double> lhs, rhs;
      if (t % 2 == 0) {
        const Index order = std::uniform_int_distribution<Index>(0, 4)(rng);
        kernel::GraphConv<double> filter("filter", in, out, order, rng);
        lhs = filter.forward(ps, px);
        rhs = permute_rows(filter.forward(s, x), perm);
      } else {
        kernel::GatLayer<double> filter("attention", in, out, rng);
        randomize(filter.parameters(), rng, 1.0);
        lhs = filter.forward(ps, px);
        rhs = permute_rows(filter.forward(s, x), perm);
      }
      const double dev = (lhs - rhs).cwiseAbs().maxCoeff();
      if (dev > r.metric) r.metric = dev;
      if (dev > r.tolerance && r.counterexample_seed == 0) r.counterexample_seed = trial_seed;
    }
    r.passed = r.metric <= r.tolerance;
    std::ostringstream detail;
    detail << trials << " (graph, filter, permutation) triples, max deviation " << r.metric;
    r.detail = detail.str();
    return r;
  });
}

SuiteResult prediction_invariance_suite(std::uint64_t seed, int trials) {
  return timed("prediction_invariance", [&] {
    SuiteResult r;
    r.tolerance = 1e-8;
    for (int t = 0; t < trials; ++t) {
      const std::uint64_t trial_seed = stream_seed(seed, "invariance", static_cast<std::uint64_t>(t));
      Rng rng(trial_seed);
      const Index n = std::uniform_int_distribution<Index>(2, 50)(rng);
      Architecture arch;
      arch.input_dim = 5;
      arch.width = 8;
      arch.head_width = 8;
      arch.layers = 2;
      arch.order = 3;
      const SparseShift s = random_shift(n, rng);
      const Matrix<double> x = gaussian(n, arch.input_dim, rng);
      const Permutation perm = Permutation::random(n, rng);
      const SparseShift ps = permute_shift(s, perm);
      const Matrix<double> px = permute_rows(x, perm);
      double dev = 0;
      if (t % 2 == 0) {
        GnnRegressor model(arch, trial_seed);
        randomize(model.parameters(), rng, 0.5);
        dev = (model.predict(ps, px) - model.predict(s, x)).cwiseAbs().maxCoeff();
      } else {
        arch.kind = ModelKind::gat;
        GatRegressor model(arch, trial_seed);
        randomize(model.parameters(), rng, 0.5);
        dev = (model.predict(ps, px) - model.predict(s, x)).cwiseAbs().maxCoeff();
      }
      if (dev > r.metric) r.metric = dev;
      if (dev > r.tolerance && r.counterexample_seed == 0) r.counterexample_seed = trial_seed;
    }
    r.passed = r.metric <= r.tolerance;
    std::ostringstream detail;
    detail << trials << " GNN/GAT regressors, max prediction change " << r.metric;
    r.detail = detail.str();
    return r;
  });
}

const std::vector<std::string>& gradient_layer_names() {
  static const std::vector<std::string> names = {"graph_conv", "gat", "maxpool", "dense", "tanh",
                                                 "elbo"};
  return names;
}

namespace {

struct Fragment {
  std::function<double()> loss;
  std::function<void()> backward;
  ParameterList<double> targets;
};

/// Holds whatever a fragment's closures reference.
struct FragmentState {
  SparseShift shift;
  kernel::Parameter<double> input;
  Matrix<double> weights;  // scalarizes the layer output
  kernel::Dense<double> dense;
  kernel::Tanh<double> tanh;
  kernel::GraphConv<double> conv;
  kernel::GatLayer<double> gat;
  kernel::GraphMaxPool<double> pool;
  std::optional<GnnCvae> cvae;
  Matrix<double> noise;
  RowVector<double> label;
};

Fragment make_fragment(const std::string& layer, FragmentState& st, Rng& rng) {
  const Index n = std::uniform_int_distribution<Index>(3, 12)(rng);
  const Index in = std::uniform_int_distribution<Index>(1, 4)(rng);
  const Index out = std::uniform_int_distribution<Index>(1, 4)(rng);
  st.shift = random_shift(n, rng);
  st.input = kernel::Parameter<double>("input", gaussian(n, in, rng));
  Fragment f;

  // Weighted sum of a layer output makes a scalar whose gradient is `weights`.
  auto wire = [&](auto forward, auto backward, ParameterList<double> params, Index rows, Index cols) {
    st.weights = gaussian(rows, cols, rng);
    params.push_back(&st.input);
    f.targets = params;
    f.loss = [&st, forward] { return (forward().array() * st.weights.array()).sum(); };
    f.backward = [&st, forward, backward, params] {
      kernel::zero_grads(params);
      forward();
      st.input.grad = backward(st.weights);
    };
  };

  if (layer == "dense") {
    st.dense = kernel::Dense<double>("dense", in, out, rng);
    randomize({&st.dense.bias()}, rng, 1.0);
    wire([&st] { return st.dense.forward(st.input.value); },
         [&st](const Matrix<double>& dy) { return st.dense.backward(dy); }, st.dense.parameters(), n,
         out);
  } else if (layer == "tanh") {
    wire([&st] { return st.tanh.forward(st.input.value); },
         [&st](const Matrix<double>& dy) { return st.tanh.backward(dy); }, {}, n, in);
  } else if (layer == "graph_conv") {
    const Index order = std::uniform_int_distribution<Index>(0, 3)(rng);
    st.conv = kernel::GraphConv<double>("graph_conv", in, out, order, rng);
    wire([&st] { return st.conv.forward(st.shift, st.input.value); },
         [&st](const Matrix<double>& dy) { return st.conv.backward(st.shift, dy); },
         st.conv.parameters(), n, out);
  } else if (layer == "gat") {
    st.gat = kernel::GatLayer<double>("gat", in, out, rng);
    randomize(st.gat.parameters(), rng, 1.0);
    wire([&st] { return st.gat.forward(st.shift, st.input.value); },
         [&st](const Matrix<double>& dy) { return st.gat.backward(st.shift, dy); },
         st.gat.parameters(), n, out);
  } else if (layer == "maxpool") {
    wire([&st] { return st.pool.forward(st.input.value); },
         [&st](const Matrix<double>& dy) { return st.pool.backward(dy); }, {}, 1, in);
  } else if (layer == "elbo") {
    Architecture arch;
    arch.kind = ModelKind::gnn_cvae;
    arch.input_dim = static_cast<int>(in);
    arch.output_dim = 2;
    arch.width = 4;
    arch.head_width = 4;
    arch.layers = 1;
    arch.order = 2;
    arch.latent_dim = 2;
    st.cvae.emplace(arch, std::uniform_int_distribution<std::uint64_t>()(rng));
    randomize({&st.cvae->encoder().output_layer().weight(), &st.cvae->decoder().output_layer().weight()},
              rng, 0.5);
    st.noise = gaussian(3, arch.latent_dim, rng);  // frozen reparameterization noise
    st.label = gaussian(1, 2, rng);
    f.targets = st.cvae->parameters();
    f.loss = [&st] {
      return st.cvae->negative_elbo(st.shift, st.input.value, st.label, st.noise, false).loss;
    };
    f.backward = [&st, targets = f.targets] {
      kernel::zero_grads(targets);
      st.cvae->negative_elbo(st.shift, st.input.value, st.label, st.noise, true);
    };
  } else {
    throw std::invalid_argument("unknown layer type: " + layer);
  }
  return f;
}

}  // namespace

SuiteResult gradient_suite(std::uint64_t seed, int fragments, const std::string& inject_fault) {
  const auto& names = gradient_layer_names();
  if (!inject_fault.empty() && std::find(names.begin(), names.end(), inject_fault) == names.end())
    throw std::invalid_argument("unknown layer type for fault injection: " + inject_fault);
  return timed("gradients", [&] {
    SuiteResult r;
    r.tolerance = 1e-4;
    std::vector<double> worst(names.size(), 0.0);
    std::vector<std::uint64_t> worst_seed(names.size(), 0);
    for (int i = 0; i < fragments; ++i) {
      const std::size_t kind = static_cast<std::size_t>(i) % names.size();
      const std::uint64_t frag_seed = stream_seed(seed, "gradients", static_cast<std::uint64_t>(i));
      Rng rng(frag_seed);
      FragmentState state;
      Fragment f = make_fragment(names[kind], state, rng);
      std::function<void()> backward = f.backward;
      if (names[kind] == inject_fault)
        backward = [&f] {
          f.backward();
          for (auto* p : f.targets) p->grad = -p->grad;
        };
      const kernel::GradientReport report = kernel::check_gradients<double>(f.loss, backward, f.targets);
      if (report.max_relative_error > worst[kind]) {
        worst[kind] = report.max_relative_error;
        worst_seed[kind] = frag_seed;
      }
    }
    std::ostringstream detail;
    std::size_t failing = names.size();
    for (std::size_t k = 0; k < names.size(); ++k) {
      detail << (k ? ", " : "") << names[k] << " " << worst[k];
      if (worst[k] > r.metric) {
        r.metric = worst[k];
        if (worst[k] > r.tolerance) failing = k;
      }
    }
    r.passed = r.metric <= r.tolerance;
    if (!r.passed) {
      r.counterexample_seed = worst_seed[failing];
      r.detail = "layer " + names[failing] + " exceeds tolerance; max relative error per layer: " +
                 detail.str();
    } else {
      r.detail = std::to_string(fragments) + " fragments; max relative error per layer: " + detail.str();
    }
    return r;
  });
}

namespace {

struct OraclePath {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<Index> nodes;
};

/// Cheapest simple path by exhaustive enumeration; ties keep the first found.
OraclePath enumerate_paths(const CSpaceGraph& g, Index source, Index target, Index removed) {
  OraclePath best;
  if (source == removed || target == removed) return best;
  std::vector<Index> stack = {source};
  std::vector<bool> on_path(static_cast<std::size_t>(g.size()), false);
  on_path[static_cast<std::size_t>(source)] = true;
  std::function<void(Index, double)> dfs = [&](Index v, double cost) {
    if (v == target) {
      if (cost < best.cost) best = {cost, stack};
      return;
    }
    for (const Neighbor& nb : g.neighbors[static_cast<std::size_t>(v)]) {
      const auto u = static_cast<std::size_t>(nb.vertex);
      if (on_path[u] || nb.vertex == removed) continue;
      on_path[u] = true;
      stack.push_back(nb.vertex);
      dfs(nb.vertex, cost + nb.weight);
      stack.pop_back();
      on_path[u] = false;
    }
  };
  dfs(source, 0.0);
  return best;
}

}  // namespace

SuiteResult search_oracle_suite(std::uint64_t seed, int graphs) {
  return timed("search_oracle", [&] {
    SuiteResult r;
    r.tolerance = 0;
    int mismatches = 0;
    for (int t = 0; t < graphs; ++t) {
      const std::uint64_t graph_seed = stream_seed(seed, "search", static_cast<std::uint64_t>(t));
      Rng rng(graph_seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const Index n = std::uniform_int_distribution<Index>(1, 8)(rng);
      CSpaceGraph g;
      g.positions.resize(n, 2);
      for (Index i = 0; i < g.positions.size(); ++i) g.positions.data()[i] = unit(rng);
      const double density = 0.3 + 0.5 * unit(rng);
      for (Index u = 0; u < n; ++u)
        for (Index v = u + 1; v < n; ++v)
          if (unit(rng) < density) {
            // At least the Euclidean length keeps the A* heuristic admissible.
            const double len = (g.positions.row(u) - g.positions.row(v)).norm();
            g.edges.push_back({u, v, len * (1.0 + unit(rng))});
          }
      finalize_graph(g);
      const Index source = std::uniform_int_distribution<Index>(0, n - 1)(rng);
      const Index target = std::uniform_int_distribution<Index>(0, n - 1)(rng);

      const OraclePath oracle = enumerate_paths(g, source, target, -1);
      const auto found = shortest_path_between(g, source, target);
      bool ok = found.has_value() == std::isfinite(oracle.cost);
      if (ok && found) {
        ok = std::abs(found->cost - oracle.cost) <= 1e-12 * std::max(1.0, oracle.cost) &&
             found->nodes == oracle.nodes;
        if (ok) {
          // Bottleneck oracle: removal cost of each interior path vertex.
          std::vector<std::pair<double, Index>> ranked;
          const double threshold = oracle.cost + 1e-9 * oracle.cost;
          for (std::size_t i = 1; i + 1 < oracle.nodes.size(); ++i) {
            const double alt = enumerate_paths(g, source, target, oracle.nodes[i]).cost;
            if (alt > threshold) ranked.emplace_back(-alt, oracle.nodes[i]);
          }
          std::sort(ranked.begin(), ranked.end());
          std::vector<Index> expected;
          for (const auto& e : ranked) expected.push_back(e.second);
          ok = bottleneck_nodes(g, *found) == expected;
        }
      }
      if (!ok) {
        if (mismatches == 0) r.counterexample_seed = graph_seed;
        ++mismatches;
      }
    }
    r.metric = mismatches;
    r.passed = mismatches == 0;
    r.detail = std::to_string(graphs) + " random graphs, " + std::to_string(mismatches) + " mismatches";
    return r;
  });
}

SuiteResult kl_suite(std::uint64_t seed, int outputs, int samples) {
  return timed("kl", [&] {
    SuiteResult r;
    r.tolerance = 0.02;
    for (int o = 0; o < outputs; ++o) {
      const std::uint64_t out_seed = stream_seed(seed, "kl", static_cast<std::uint64_t>(o));
      Rng rng(out_seed);
      Architecture arch;
      arch.kind = ModelKind::gnn_cvae;
      arch.width = 8;
      arch.head_width = 8;
      arch.latent_dim = 3;
      GnnCvae cvae(arch, out_seed);
      randomize({&cvae.encoder().output_layer().weight()}, rng, 1.0);
      const Index n = std::uniform_int_distribution<Index>(3, 30)(rng);
      const SparseShift s = random_shift(n, rng);
      const auto enc = cvae.encode(s, gaussian(n, arch.input_dim, rng), gaussian(1, arch.output_dim, rng));
      const double closed = gaussian_kl(enc.mu, enc.log_var);

      // E_q[log q(z) - log p(z)] with z = mu + sigma * eps
      std::normal_distribution<double> normal(0.0, 1.0);
      double sum = 0;
      for (int i = 0; i < samples; ++i) {
        double log_ratio = 0;
        for (Index j = 0; j < enc.mu.cols(); ++j) {
          const double eps = normal(rng);
          const double z = enc.mu(j) + std::exp(0.5 * enc.log_var(j)) * eps;
          log_ratio += -0.5 * enc.log_var(j) - 0.5 * eps * eps + 0.5 * z * z;
        }
        sum += log_ratio;
      }
      const double mc = sum / samples;
      const double rel = std::abs(mc - closed) / std::abs(closed);
      if (rel > r.metric) r.metric = rel;
      if (rel > r.tolerance && r.counterexample_seed == 0) r.counterexample_seed = out_seed;
    }
    r.passed = r.metric <= r.tolerance;
    std::ostringstream detail;
    detail << outputs << " encoder outputs, " << samples << " samples each, worst relative error "
           << r.metric;
    r.detail = detail.str();
    return r;
  });
}

double dispersion(const Eigen::MatrixXd& points, int probes) {
  double worst = 0;
  for (int i = 0; i < probes; ++i)
    for (int j = 0; j < probes; ++j) {
      const Eigen::RowVector2d q((i + 0.5) / probes, (j + 0.5) / probes);
      const double nearest = (points.rowwise() - q).rowwise().squaredNorm().minCoeff();
      worst = std::max(worst, nearest);
    }
  return std::sqrt(worst);
}

SuiteResult halton_dispersion_suite(std::uint64_t seed) {
  return timed("halton_dispersion", [&] {
    SuiteResult r;
    r.tolerance = 1.0;
    const double halton = dispersion(halton_points(2000, 2));
    double mean = 0;
    for (int s = 0; s < 20; ++s) {
      Rng rng = make_stream(seed, "uniform-set", static_cast<std::uint64_t>(s));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      Eigen::MatrixXd pts(2000, 2);
      for (Index i = 0; i < pts.size(); ++i) pts.data()[i] = unit(rng);
      mean += dispersion(pts) / 20.0;
    }
    r.metric = halton / mean;
    r.passed = r.metric < r.tolerance;
    r.counterexample_seed = seed;
    std::ostringstream detail;
    detail << "halton dispersion " << halton << " vs uniform mean " << mean;
    r.detail = detail.str();
    return r;
  });
}

SuiteResult energy_drift_suite(std::uint64_t seed) {
  return timed("energy_drift", [&] {
    SuiteResult r;
    r.tolerance = 1e-6;
    const PendulumParams params;
    Rng rng = make_stream(seed, "energy");
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> speed(-3.0, 3.0);
    for (int trial = 0; trial < 10; ++trial) {
      PendulumState s;
      do {
        s = {angle(rng), speed(rng)};
      } while (std::abs(pendulum_energy(s, params)) < 1.0);
      const double e0 = pendulum_energy(s, params);
      for (int step = 0; step < 1000; ++step) {
        s = pendulum_step(s, 0.0, 0.01, params);
        r.metric = std::max(r.metric, std::abs(pendulum_energy(s, params) - e0) / std::abs(e0));
      }
    }
    r.passed = r.metric <= r.tolerance;
    r.counterexample_seed = seed;
    std::ostringstream detail;
    detail << "10 trajectories of 10 s at dt 0.01, max relative drift " << r.metric;
    r.detail = detail.str();
    return r;
  });
}

std::vector<SuiteResult> run_verify(const VerifyOptions& options) {
  return {equivariance_suite(options.seed),
          prediction_invariance_suite(options.seed),
          gradient_suite(options.seed, 50, options.inject_fault),
          search_oracle_suite(options.seed),
          kl_suite(options.seed),
          halton_dispersion_suite(options.seed),
          energy_drift_suite(options.seed)};
}

}  // namespace gnnmp
