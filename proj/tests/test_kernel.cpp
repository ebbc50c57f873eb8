#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gnnmp/cspace_graph.hpp"
#include "gnnmp/kernel/checkpoint.hpp"
#include "gnnmp/kernel/gradcheck.hpp"
#include "gnnmp/kernel/layers.hpp"
#include "gnnmp/kernel/optim.hpp"
#include "gnnmp/verify.hpp"

using namespace gnnmp;
using namespace gnnmp::kernel;

namespace {

SparseOp<double> small_graph(Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd p(n, 2);
  for (Index i = 0; i < n; ++i) p.row(i) << unit(rng), unit(rng);
  return normalize_shift(build_r_disc_graph(p, 0.45).shift);
}

Matrix<double> random_matrix(Index r, Index c, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix<double> m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// Checks a fragment loss = <weights, f(input)> against finite differences for
// every parameter and the input itself.
template <class Forward, class Backward>
double fragment_error(Parameter<double>& input, ParameterList<double> params, Forward forward,
                      Backward backward, Rng& rng) {
  const Matrix<double> probe = forward();
  const Matrix<double> weights = random_matrix(probe.rows(), probe.cols(), rng);
  params.push_back(&input);
  const auto report = check_gradients<double>(
      [&] { return forward().cwiseProduct(weights).sum(); },
      [&] {
        zero_grads(params);
        forward();
        input.grad = backward(weights);
      },
      params);
  return report.max_relative_error;
}

}  // namespace

TEST_CASE("gradient checker reports exact agreement on a quadratic") {
  Parameter<double> p("p", (Matrix<double>(2, 2) << 1, -2, 3, 0.5).finished());
  auto loss = [&] { return p.value.squaredNorm(); };
  auto backward = [&] { p.grad = 2 * p.value; };
  CHECK(check_gradients<double>(loss, backward, {&p}).max_relative_error < 1e-9);
  auto wrong = [&] { p.grad = -2 * p.value; };
  const auto report = check_gradients<double>(loss, wrong, {&p});
  // Scaled by the larger gradient norm, a sign flip costs exactly 2.
  CHECK(report.max_relative_error == doctest::Approx(2.0));
  CHECK(report.worst == "p");
}

TEST_CASE("dense and tanh forward match explicit arithmetic") {
  Rng rng(1);
  Dense<double> dense("d", 3, 2, rng);
  dense.bias().value << 0.25, -0.5;
  const Matrix<double> x = random_matrix(4, 3, rng);
  const Matrix<double> y = dense.forward(x);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 2; ++j) {
      double expected = dense.bias().value(0, j);
      for (Index k = 0; k < 3; ++k) expected += x(i, k) * dense.weight().value(k, j);
      CHECK(y(i, j) == doctest::Approx(expected).epsilon(1e-14));
    }
  Tanh<double> t;
  const Matrix<double> z = t.forward(x);
  for (Index i = 0; i < x.size(); ++i) CHECK(z.data()[i] == std::tanh(x.data()[i]));
  CHECK_THROWS_AS(dense.forward(random_matrix(2, 4, rng)), std::domain_error);
}

TEST_CASE("graph convolution equals the dense polynomial filter") {
  Rng rng(2);
  const SparseOp<double> s = small_graph(12, 3);
  const Eigen::MatrixXd sd(s);
  for (Index order : {0, 1, 3}) {
    GraphConv<double> conv("c", 4, 3, order, rng);
    const Matrix<double> x = random_matrix(12, 4, rng);
    Matrix<double> expected = Matrix<double>::Zero(12, 3);
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(12, 12);
    for (Index k = 0; k <= order; ++k) {
      expected += power * x * conv.taps()[static_cast<std::size_t>(k)].value;
      power = power * sd;
    }
    CHECK((conv.forward(s, x) - expected).cwiseAbs().maxCoeff() < 1e-12);
    std::vector<Matrix<double>> taps;
    for (auto& t : conv.taps()) taps.push_back(t.value);
    CHECK((graph_filter(s, x, taps) - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(GraphConv<double>("bad", 2, 2, -1, rng), std::invalid_argument);
}

TEST_CASE("attention layer matches a dense softmax over neighbors and self") {
  Rng rng(4);
  const SparseOp<double> s = small_graph(10, 5);
  const Eigen::MatrixXd sd(s);
  GatLayer<double> gat("g", 3, 4, rng);
  const Matrix<double> x = random_matrix(10, 3, rng);
  const Matrix<double> out = gat.forward(s, x);
  const Matrix<double> h = x * gat.weight().value;
  const Eigen::VectorXd a1 = gat.attention().value.topRows(4);
  const Eigen::VectorXd a2 = gat.attention().value.bottomRows(4);
  for (Index i = 0; i < 10; ++i) {
    std::vector<Index> nbrs;
    for (Index j = 0; j < 10; ++j)
      if (j == i || sd(i, j) != 0) nbrs.push_back(j);
    std::vector<double> e;
    double total = 0;
    for (Index j : nbrs) {
      const double pre = h.row(i).dot(a1) + h.row(j).dot(a2);
      e.push_back(std::exp(pre > 0 ? pre : 0.2 * pre));
      total += e.back();
    }
    Eigen::RowVectorXd expected = Eigen::RowVectorXd::Zero(4);
    double weight_sum = 0;
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      expected += (e[k] / total) * h.row(nbrs[k]);
      weight_sum += e[k] / total;
    }
    CHECK((out.row(i) - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(weight_sum == doctest::Approx(1.0));
    CHECK(gat.attention_of(i).size() == nbrs.size());
  }
}

TEST_CASE("maxpool takes the column maximum and routes gradient to it") {
  GraphMaxPool<double> pool;
  Matrix<double> x(3, 2);
  x << 1, 5, 4, -1, 4, 2;
  const Matrix<double> y = pool.forward(x);
  CHECK(y(0, 0) == 4);
  CHECK(y(0, 1) == 5);
  Matrix<double> dy(1, 2);
  dy << 2, 3;
  const Matrix<double> dx = pool.backward(dy);
  CHECK(dx(1, 0) == 2);  // first of the tied rows
  CHECK(dx(2, 0) == 0);
  CHECK(dx(0, 1) == 3);
  CHECK(dx.sum() == 5);
  CHECK_THROWS_AS(pool.forward(Matrix<double>(0, 2)), std::domain_error);
}

TEST_CASE("layer gradients match central differences") {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const SparseOp<double> s = small_graph(9, static_cast<std::uint64_t>(trial));
    Parameter<double> input("x", random_matrix(9, 3, rng));

    Dense<double> dense("dense", 3, 4, rng);
    CHECK(fragment_error(input, dense.parameters(), [&] { return dense.forward(input.value); },
                         [&](const Matrix<double>& w) { return dense.backward(w); }, rng) < 1e-6);

    Tanh<double> tanh;
    CHECK(fragment_error(input, {}, [&] { return tanh.forward(input.value); },
                         [&](const Matrix<double>& w) { return tanh.backward(w); }, rng) < 1e-6);

    GraphConv<double> conv("conv", 3, 4, 3, rng);
    CHECK(fragment_error(input, conv.parameters(), [&] { return conv.forward(s, input.value); },
                         [&](const Matrix<double>& w) { return conv.backward(s, w); }, rng) < 1e-6);

    GatLayer<double> gat("gat", 3, 4, rng);
    CHECK(fragment_error(input, gat.parameters(), [&] { return gat.forward(s, input.value); },
                         [&](const Matrix<double>& w) { return gat.backward(s, w); }, rng) < 1e-6);

    GraphMaxPool<double> pool;
    CHECK(fragment_error(input, {}, [&] { return pool.forward(input.value); },
                         [&](const Matrix<double>& w) { return pool.backward(w); }, rng) < 1e-6);
  }
}

TEST_CASE("a sign error in any layer is caught and named") {
  for (const std::string& layer : gradient_layer_names()) {
    const SuiteResult r = gradient_suite(1, static_cast<int>(gradient_layer_names().size()), layer);
    CHECK_FALSE(r.passed);
    CHECK(r.detail.find(layer) != std::string::npos);
  }
  CHECK(gradient_suite(1, 3).passed);
  CHECK_THROWS_AS(gradient_suite(1, 1, "no_such_layer"), std::invalid_argument);
}

TEST_CASE("first Adam step moves each coordinate by the learning rate against its gradient sign") {
  Parameter<double> p("p", (Matrix<double>(1, 3) << 1, 2, 3).finished());
  Adam<double> adam({&p}, AdamOptions{0.1});
  p.grad << 0.5, -4, 0;
  adam.step();
  CHECK(p.value(0, 0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p.value(0, 1) == doctest::Approx(2.1).epsilon(1e-6));
  CHECK(p.value(0, 2) == 3.0);
  CHECK(adam.steps() == 1);

  // Second step follows the bias-corrected moment recursion.
  const double g1 = 0.5, g2 = 0.25, before = p.value(0, 0);
  p.grad << g2, 0, 0;
  adam.step();
  const double m = (0.9 * 0.1 * g1 + 0.1 * g2) / (1 - 0.81);
  const double v = (0.999 * 0.001 * g1 * g1 + 0.001 * g2 * g2) / (1 - 0.999 * 0.999);
  CHECK(p.value(0, 0) == doctest::Approx(before - 0.1 * m / (std::sqrt(v) + 1e-8)).epsilon(1e-12));
}

TEST_CASE("parameter JSON round trip is exact") {
  Rng rng(8);
  GraphConv<double> a("c", 3, 2, 2, rng), b("c", 3, 2, 2, rng);
  a.taps()[1].value(0, 0) = 0.1 + 1e-17;
  parameters_from_json(nlohmann::json::parse(parameters_to_json(a.parameters()).dump()), b.parameters());
  for (std::size_t k = 0; k < 3; ++k) CHECK(a.taps()[k].value == b.taps()[k].value);
  GraphConv<double> wrong("c", 3, 5, 2, rng);
  CHECK_THROWS_AS(parameters_from_json(parameters_to_json(a.parameters()), wrong.parameters()),
                  std::invalid_argument);
}
