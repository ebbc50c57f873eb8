#include "gnnmp/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gnnmp/kernel/checkpoint.hpp"

namespace gnnmp {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::gnn: return "gnn";
    case ModelKind::gat: return "gat";
    case ModelKind::gnn_cvae: return "gnn_cvae";
  }
  return "gnn";
}

ModelKind model_kind_from_string(const std::string& text) {
  if (text == "gnn") return ModelKind::gnn;
  if (text == "gat") return ModelKind::gat;
  if (text == "gnn_cvae") return ModelKind::gnn_cvae;
  throw std::invalid_argument("unknown model kind: " + text);
}

nlohmann::json to_json(const Architecture& arch) {
  return {{"kind", to_string(arch.kind)},       {"input_dim", arch.input_dim},
          {"output_dim", arch.output_dim},      {"width", arch.width},
          {"layers", arch.layers},              {"order", arch.order},
          {"head_width", arch.head_width},      {"latent_dim", arch.latent_dim}};
}

Architecture architecture_from_json(const nlohmann::json& doc) {
  Architecture arch;
  arch.kind = model_kind_from_string(doc.at("kind").get<std::string>());
  arch.input_dim = doc.at("input_dim").get<int>();
  arch.output_dim = doc.at("output_dim").get<int>();
  arch.width = doc.at("width").get<int>();
  arch.layers = doc.at("layers").get<int>();
  arch.order = doc.at("order").get<int>();
  arch.head_width = doc.at("head_width").get<int>();
  arch.latent_dim = doc.at("latent_dim").get<int>();
  return arch;
}

namespace {

Matrix<double> append_broadcast(const Matrix<double>& x, const RowVector<double>& row) {
  Matrix<double> out(x.rows(), x.cols() + row.cols());
  out.leftCols(x.cols()) = x;
  out.rightCols(row.cols()) = row.replicate(x.rows(), 1);
  return out;
}

Matrix<double> standard_normal(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix<double> out(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) out(r, c) = normal(rng);
  return out;
}

}  // namespace

double gaussian_kl(const RowVector<double>& mu, const RowVector<double>& log_var) {
  return 0.5 * (mu.array().square() + log_var.array().exp() - 1.0 - log_var.array()).sum();
}

GnnCvae::GnnCvae(const Architecture& arch, std::uint64_t seed) : arch_(arch) {
  Rng rng = make_stream(seed, "init");
  encoder_ = GraphReadout<kernel::GraphConv<double>>(
      "encoder", arch.input_dim + arch.output_dim, 2 * arch.latent_dim, arch, rng);
  decoder_ = GraphReadout<kernel::GraphConv<double>>(
      "decoder", arch.input_dim + arch.latent_dim, arch.output_dim, arch, rng);
}

GnnCvae::Encoding GnnCvae::encode(const SparseShift& shift, const Matrix<double>& x,
                                  const RowVector<double>& y) {
  const RowVector<double> out = encoder_.forward(shift, append_broadcast(x, y));
  return {out.leftCols(arch_.latent_dim), out.rightCols(arch_.latent_dim)};
}

RowVector<double> GnnCvae::decode(const SparseShift& shift, const Matrix<double>& x,
                                  const RowVector<double>& tau) {
  if (tau.cols() != arch_.latent_dim) throw std::domain_error("latent width mismatch");
  return decoder_.forward(shift, append_broadcast(x, tau));
}

ElboTerms GnnCvae::negative_elbo(const SparseShift& shift, const Matrix<double>& x,
                                 const RowVector<double>& y, const Matrix<double>& noise,
                                 bool accumulate) {
  const Index p = arch_.latent_dim;
  if (noise.rows() < 1 || noise.cols() != p) throw std::domain_error("latent noise shape mismatch");
  const Encoding enc = encode(shift, x, y);
  const RowVector<double> sigma = (0.5 * enc.log_var.array()).exp().matrix();
  const double inv_samples = 1.0 / static_cast<double>(noise.rows());

  ElboTerms terms;
  terms.kl = gaussian_kl(enc.mu, enc.log_var);
  RowVector<double> d_mu = enc.mu;
  RowVector<double> d_log_var = 0.5 * (enc.log_var.array().exp() - 1.0).matrix();
  for (Index i = 0; i < noise.rows(); ++i) {
    const RowVector<double> tau = enc.mu + sigma.cwiseProduct(noise.row(i));
    const RowVector<double> y_hat = decode(shift, x, tau);
    const RowVector<double> diff = y_hat - y;
    terms.reconstruction += 0.5 * diff.squaredNorm() * inv_samples;
    if (accumulate) {
      const Matrix<double> dx = decoder_.backward(shift, diff * inv_samples);
      const RowVector<double> d_tau = dx.rightCols(p).colwise().sum();
      d_mu += d_tau;
      d_log_var += (0.5 * d_tau.array() * noise.row(i).array() * sigma.array()).matrix();
    }
  }
  terms.loss = terms.kl + terms.reconstruction;
  if (accumulate) {
    RowVector<double> d_out(2 * p);
    d_out << d_mu, d_log_var;
    encoder_.backward(shift, d_out);
  }
  return terms;
}

double GnnCvae::loss(const SparseShift& shift, const Matrix<double>& x,
                     const Eigen::MatrixXd& labels, Rng& noise_rng, int samples, bool accumulate) {
  double total = 0;
  for (Index l = 0; l < labels.rows(); ++l) {
    const Matrix<double> noise = standard_normal(samples, arch_.latent_dim, noise_rng);
    total += negative_elbo(shift, x, labels.row(l), noise, accumulate).loss;
  }
  return total;
}

Eigen::VectorXd GnnCvae::predict(const SparseShift& shift, const Matrix<double>& x) {
  return decode(shift, x, RowVector<double>::Zero(arch_.latent_dim)).transpose();
}

ParameterList<double> GnnCvae::parameters() {
  ParameterList<double> out = encoder_.parameters();
  for (auto* p : decoder_.parameters()) out.push_back(p);
  return out;
}

Eigen::MatrixXd sample_critical_distribution(GnnCvae& cvae, const SparseShift& shift,
                                             const Matrix<double>& x, int n, std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("sample count must be non-negative");
  Rng rng = make_stream(seed, "latent");
  const Matrix<double> latents = standard_normal(n, cvae.latent_dim(), rng);
  Eigen::MatrixXd out(n, cvae.architecture().output_dim);
  for (int i = 0; i < n; ++i) out.row(i) = cvae.decode(shift, x, latents.row(i));
  return out;
}

double accuracy(const std::vector<Eigen::VectorXd>& predictions,
                const std::vector<Eigen::VectorXd>& labels) {
  if (predictions.size() != labels.size()) throw std::domain_error("length mismatch");
  if (predictions.empty()) throw std::domain_error("accuracy of an empty set");
  double mse = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) mse += (predictions[i] - labels[i]).squaredNorm();
  mse /= static_cast<double>(labels.size());
  return std::max(0.0, 1.0 - mse);
}

ConstantPredictor fit_constant(const std::vector<GraphSample>& train) {
  ConstantPredictor c;
  Index count = 0;
  for (const auto& s : train) {
    if (c.mean.size() == 0) c.mean = Eigen::VectorXd::Zero(s.labels.cols());
    c.mean += s.labels.colwise().sum().transpose();
    count += s.labels.rows();
  }
  if (count == 0) throw std::domain_error("constant predictor needs at least one label");
  c.mean /= static_cast<double>(count);
  return c;
}

// --- Trainer ----------------------------------------------------------------

template <class Model>
double Trainer<Model>::sample_loss(const GraphSample& s, Rng& noise, bool accumulate) {
  if constexpr (std::is_same_v<Model, GnnCvae>)
    return model_->loss(*s.shift, s.features, s.labels, noise, options_.latent_samples, accumulate);
  else
    return model_->loss(*s.shift, s.features, s.labels, accumulate);
}

template <class Model>
double Trainer<Model>::evaluate(const std::vector<GraphSample>& samples, std::uint64_t noise_index) {
  Rng noise = make_stream(options_.seed, "eval-latent", noise_index);
  double total = 0;
  Index labels = 0;
  for (const auto& s : samples) {
    total += sample_loss(s, noise, false);
    labels += s.labels.rows();
  }
  return labels > 0 ? total / static_cast<double>(labels) : 0.0;
}

template <class Model>
const LossCurve& Trainer<Model>::train(const std::vector<GraphSample>& train_set,
                                       const std::vector<GraphSample>& validation_set,
                                       int epochs) {
  if (train_set.empty()) throw std::invalid_argument("empty training split");
  const auto params = model_->parameters();
  const std::size_t batch = static_cast<std::size_t>(std::max(options_.batch_size, 1));
  for (int e = 0; e < epochs; ++e, ++epoch_) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = make_stream(options_.seed, "shuffle", static_cast<std::uint64_t>(epoch_));
    std::shuffle(order.begin(), order.end(), shuffle);
    Rng noise = make_stream(options_.seed, "latent", static_cast<std::uint64_t>(epoch_));

    double epoch_total = 0;
    Index epoch_labels = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      kernel::zero_grads(params);
      Index batch_labels = 0;
      for (std::size_t k = start; k < std::min(order.size(), start + batch); ++k) {
        const GraphSample& s = train_set[order[k]];
        epoch_total += sample_loss(s, noise, true);
        batch_labels += s.labels.rows();
      }
      epoch_labels += batch_labels;
      if (!std::isfinite(epoch_total)) throw TrainingError("non-finite training loss", epoch_);
      optimizer_.step(1.0 / static_cast<double>(std::max<Index>(batch_labels, 1)));
    }
    curve_.train.push_back(epoch_total / static_cast<double>(std::max<Index>(epoch_labels, 1)));
    const double val = validation_set.empty() ? 0.0 : evaluate(validation_set, 0);
    if (!std::isfinite(val)) throw TrainingError("non-finite validation loss", epoch_);
    curve_.validation.push_back(val);
  }
  return curve_;
}

template <class Model>
nlohmann::json Trainer<Model>::checkpoint() {
  nlohmann::json doc;
  doc["format_version"] = kernel::kParameterFormatVersion;
  doc["architecture"] = to_json(model_->architecture());
  doc["parameters"] = kernel::parameters_to_json(model_->parameters());
  doc["optimizer"] = optimizer_.state();
  doc["epoch"] = epoch_;
  doc["curve"] = {{"train", curve_.train}, {"validation", curve_.validation}};
  doc["options"] = {{"batch_size", options_.batch_size},
                    {"learning_rate", options_.learning_rate},
                    {"seed", options_.seed},
                    {"latent_samples", options_.latent_samples}};
  return doc;
}

template <class Model>
Trainer<Model> Trainer<Model>::restore(const nlohmann::json& doc) {
  TrainOptions options;
  const auto& o = doc.at("options");
  options.batch_size = o.at("batch_size").get<int>();
  options.learning_rate = o.at("learning_rate").get<double>();
  options.seed = o.at("seed").get<std::uint64_t>();
  options.latent_samples = o.at("latent_samples").get<int>();
  const Architecture arch = architecture_from_json(doc.at("architecture"));
  Trainer trainer(Model(arch, options.seed), options);
  kernel::parameters_from_json(doc.at("parameters"), trainer.model_->parameters());
  trainer.optimizer_.restore(doc.at("optimizer"));
  trainer.epoch_ = doc.at("epoch").get<int>();
  trainer.curve_.train = doc.at("curve").at("train").get<std::vector<double>>();
  trainer.curve_.validation = doc.at("curve").at("validation").get<std::vector<double>>();
  return trainer;
}

template class Trainer<GnnRegressor>;
template class Trainer<GatRegressor>;
template class Trainer<GnnCvae>;

}  // namespace gnnmp
