#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gnnmp/models.hpp"

using namespace gnnmp;

namespace {

Architecture small_arch(ModelKind kind, int input_dim = 5, int output_dim = 2) {
  Architecture a;
  a.kind = kind;
  a.input_dim = input_dim;
  a.output_dim = output_dim;
  a.width = 8;
  a.head_width = 8;
  a.order = 2;
  a.latent_dim = 2;
  return a;
}

// Ten samples on one 30-node graph whose labels depend on the features.
std::vector<GraphSample> toy_samples(int n, std::uint64_t seed) {
  auto shift = std::make_shared<const SparseShift>(
      normalize_shift(build_r_disc_graph(halton_points(30, 2), 0.3).shift));
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<GraphSample> out;
  for (int i = 0; i < n; ++i) {
    GraphSample s;
    s.shift = shift;
    s.features = Eigen::MatrixXd::Zero(30, 5);
    const double a = unit(rng), b = unit(rng);
    for (Index r = 0; r < 30; ++r) s.features.row(r) << a, b, a * b, unit(rng) * 0.1, 1.0;
    s.labels.resize(1, 2);
    s.labels << 0.5 * a, 0.3 * b;
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("closed-form KL matches the Gaussian formula") {
  RowVector<double> mu(3), log_var(3);
  mu << 0, 0, 0;
  log_var << 0, 0, 0;
  CHECK(gaussian_kl(mu, log_var) == 0.0);
  mu << 1, -2, 0.5;
  log_var << std::log(2.0), std::log(0.5), 0;
  const double expected = 0.5 * ((1 + 2 - 1 - std::log(2.0)) + (4 + 0.5 - 1 - std::log(0.5)) + (0.25 + 1 - 1 - 0));
  CHECK(gaussian_kl(mu, log_var) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("accuracy is one minus the mean squared distance, floored at zero") {
  std::vector<Eigen::VectorXd> p = {Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1)};
  std::vector<Eigen::VectorXd> y = {Eigen::Vector2d(0.1, 0), Eigen::Vector2d(1, 0.8)};
  CHECK(accuracy(p, y) == doctest::Approx(1 - (0.01 + 0.04) / 2));
  std::vector<Eigen::VectorXd> far = {Eigen::Vector2d(5, 5), Eigen::Vector2d(5, 5)};
  CHECK(accuracy(far, y) == 0.0);
}

TEST_CASE("constant predictor is the mean of every training label") {
  auto samples = toy_samples(6, 1);
  samples[0].labels.conservativeResize(2, 2);
  samples[0].labels.row(1) << 1.0, -1.0;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  int count = 0;
  for (const auto& s : samples)
    for (Index r = 0; r < s.labels.rows(); ++r, ++count) sum += s.labels.row(r).transpose();
  const ConstantPredictor c = fit_constant(samples);
  CHECK((c.mean - sum / count).norm() < 1e-15);
}

TEST_CASE("regressor predictions are invariant to node relabeling") {
  const auto samples = toy_samples(3, 2);
  Rng rng(3);
  for (ModelKind kind : {ModelKind::gnn, ModelKind::gat}) {
    for (const auto& s : samples) {
      const Permutation perm = Permutation::random(30, rng);
      const SparseShift ps = permute_shift(*s.shift, perm);
      const Eigen::MatrixXd px = permute_problem(s.features, perm);
      if (kind == ModelKind::gnn) {
        GnnRegressor m(small_arch(kind), 4);
        m.network().output_layer().weight().value.setConstant(0.3);
        CHECK((m.predict(*s.shift, s.features) - m.predict(ps, px)).cwiseAbs().maxCoeff() < 1e-12);
      } else {
        GatRegressor m(small_arch(kind), 4);
        m.network().output_layer().weight().value.setConstant(0.3);
        CHECK((m.predict(*s.shift, s.features) - m.predict(ps, px)).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("a freshly built regressor predicts the output bias") {
  GnnRegressor m(small_arch(ModelKind::gnn), 1);
  const auto s = toy_samples(1, 1).front();
  CHECK(m.predict(*s.shift, s.features).norm() == 0.0);
}

TEST_CASE("training a small dataset cuts the loss tenfold") {
  const auto samples = toy_samples(10, 5);
  TrainOptions options;
  options.batch_size = 5;
  options.learning_rate = 3e-3;
  Trainer<GnnRegressor> trainer(GnnRegressor(small_arch(ModelKind::gnn), 6), options);
  const LossCurve& curve = trainer.train(samples, {}, 200);
  REQUIRE(curve.train.size() == 200);
  CHECK(curve.train.back() < curve.train.front() / 10);
}

TEST_CASE("a single sample is memorized") {
  const auto samples = toy_samples(1, 9);
  TrainOptions options;
  options.batch_size = 1;
  options.learning_rate = 1e-2;
  Trainer<GnnRegressor> trainer(GnnRegressor(small_arch(ModelKind::gnn), 2), options);
  CHECK(trainer.train(samples, {}, 300).train.back() < 1e-3);
}

TEST_CASE("resumed training continues exactly like an uninterrupted run") {
  const auto train = toy_samples(8, 11), validation = toy_samples(3, 12);
  TrainOptions options;
  options.batch_size = 3;
  for (ModelKind kind : {ModelKind::gnn, ModelKind::gnn_cvae}) {
    if (kind == ModelKind::gnn) {
      Trainer<GnnRegressor> full(GnnRegressor(small_arch(kind), 3), options);
      full.train(train, validation, 6);
      Trainer<GnnRegressor> first(GnnRegressor(small_arch(kind), 3), options);
      first.train(train, validation, 3);
      auto second = Trainer<GnnRegressor>::restore(nlohmann::json::parse(first.checkpoint().dump()));
      second.train(train, validation, 3);
      CHECK(second.curve().train == full.curve().train);
      CHECK(second.curve().validation == full.curve().validation);
      CHECK(second.epoch() == 6);
    } else {
      Trainer<GnnCvae> full(GnnCvae(small_arch(kind), 3), options);
      full.train(train, validation, 4);
      Trainer<GnnCvae> first(GnnCvae(small_arch(kind), 3), options);
      first.train(train, validation, 2);
      auto second = Trainer<GnnCvae>::restore(nlohmann::json::parse(first.checkpoint().dump()));
      second.train(train, validation, 2);
      CHECK(second.curve().train == full.curve().train);
    }
  }
}

TEST_CASE("non-finite losses stop training with the epoch index") {
  auto samples = toy_samples(2, 1);
  samples[1].labels(0, 0) = std::nan("");
  Trainer<GnnRegressor> trainer(GnnRegressor(small_arch(ModelKind::gnn), 1), TrainOptions{});
  try {
    trainer.train(samples, {}, 3);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    CHECK(e.epoch() == 0);
  }
}

TEST_CASE("ELBO terms combine KL and reconstruction") {
  const auto s = toy_samples(1, 4).front();
  GnnCvae cvae(small_arch(ModelKind::gnn_cvae), 7);
  Matrix<double> noise = Matrix<double>::Zero(2, 2);
  noise << 0.3, -1.0, 1.2, 0.1;
  const RowVector<double> y = s.labels.row(0);
  const ElboTerms terms = cvae.negative_elbo(*s.shift, s.features, y, noise, false);
  const auto enc = cvae.encode(*s.shift, s.features, y);
  CHECK(terms.kl == doctest::Approx(gaussian_kl(enc.mu, enc.log_var)).epsilon(1e-14));
  double recon = 0;
  for (Index i = 0; i < 2; ++i) {
    const RowVector<double> tau =
        enc.mu.array() + (0.5 * enc.log_var.array()).exp() * noise.row(i).array();
    recon += 0.5 * (y - cvae.decode(*s.shift, s.features, tau)).squaredNorm();
  }
  CHECK(terms.reconstruction == doctest::Approx(recon / 2).epsilon(1e-12));
  CHECK(terms.loss == doctest::Approx(terms.kl + terms.reconstruction).epsilon(1e-14));
}

TEST_CASE("decoder sampling is reproducible per seed") {
  const auto s = toy_samples(1, 4).front();
  GnnCvae cvae(small_arch(ModelKind::gnn_cvae), 7);
  for (auto* p : cvae.parameters()) p->value.setConstant(0.2);
  const Eigen::MatrixXd a = sample_critical_distribution(cvae, *s.shift, s.features, 50, 1);
  const Eigen::MatrixXd b = sample_critical_distribution(cvae, *s.shift, s.features, 50, 1);
  CHECK(a.rows() == 50);
  CHECK(a.cols() == 2);
  CHECK(a == b);
}

TEST_CASE("architecture JSON round trip") {
  Architecture a = small_arch(ModelKind::gat, 12, 6);
  a.layers = 3;
  const Architecture b = architecture_from_json(to_json(a));
  CHECK(b.kind == a.kind);
  CHECK(b.input_dim == 12);
  CHECK(b.output_dim == 6);
  CHECK(b.layers == 3);
  CHECK(b.order == a.order);
  CHECK_THROWS(model_kind_from_string("cnn"));
}
