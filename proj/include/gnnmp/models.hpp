#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnnmp/cspace_graph.hpp"
#include "gnnmp/kernel/layers.hpp"
#include "gnnmp/kernel/optim.hpp"
#include "gnnmp/rng.hpp"

namespace gnnmp {

using kernel::Matrix;
using kernel::ParameterList;
using kernel::RowVector;

enum class ModelKind { gnn, gat, gnn_cvae };
std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& text);

struct Architecture {
  ModelKind kind = ModelKind::gnn;
  int input_dim = 5;
  int output_dim = 2;
  int width = 32;
  int layers = 2;
  int order = 3;
  int head_width = 32;
  int latent_dim = 3;
};

nlohmann::json to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& doc);

/// Graph layers with tanh, graph maxpool, then a two-layer dense head
/// (tanh hidden, linear output). The output layer starts at zero.
template <class GraphLayer>
class GraphReadout {
 public:
  GraphReadout() = default;
  template <class Rng>
  GraphReadout(const std::string& name, int input_dim, int output_dim, const Architecture& arch,
               Rng& rng) {
    int in = input_dim;
    for (int l = 0; l < arch.layers; ++l) {
      const std::string layer_name = name + ".graph" + std::to_string(l);
      if constexpr (std::is_same_v<GraphLayer, kernel::GraphConv<double>>)
        graph_.emplace_back(layer_name, in, arch.width, arch.order, rng);
      else
        graph_.emplace_back(layer_name, in, arch.width, rng);
      in = arch.width;
    }
    activations_.resize(graph_.size());
    hidden_ = kernel::Dense<double>(name + ".head0", in, arch.head_width, rng);
    output_ = kernel::Dense<double>(name + ".head1", arch.head_width, output_dim, rng);
    output_.weight().value.setZero();
  }

  RowVector<double> forward(const SparseShift& shift, const Matrix<double>& x) {
    Matrix<double> h = x;
    for (std::size_t l = 0; l < graph_.size(); ++l)
      h = activations_[l].forward(graph_[l].forward(shift, h));
    Matrix<double> pooled = pool_.forward(h);
    return output_.forward(hidden_act_.forward(hidden_.forward(pooled)));
  }

  /// Accumulates parameter gradients; returns the gradient w.r.t. x.
  Matrix<double> backward(const SparseShift& shift, const RowVector<double>& dy) {
    Matrix<double> g = hidden_.backward(hidden_act_.backward(output_.backward(dy)));
    g = pool_.backward(g);
    for (std::size_t l = graph_.size(); l-- > 0;)
      g = graph_[l].backward(shift, activations_[l].backward(g));
    return g;
  }

  ParameterList<double> parameters() {
    ParameterList<double> out;
    for (auto& layer : graph_)
      for (auto* p : layer.parameters()) out.push_back(p);
    for (auto* p : hidden_.parameters()) out.push_back(p);
    for (auto* p : output_.parameters()) out.push_back(p);
    return out;
  }

  kernel::Dense<double>& output_layer() { return output_; }

 private:
  std::vector<GraphLayer> graph_;
  std::vector<kernel::Tanh<double>> activations_;
  kernel::GraphMaxPool<double> pool_;
  kernel::Dense<double> hidden_;
  kernel::Tanh<double> hidden_act_;
  kernel::Dense<double> output_;
};

/// Point regressor y_hat = readout(S, x) in R^d.
template <class GraphLayer>
class GraphRegressor {
 public:
  GraphRegressor() = default;
  GraphRegressor(const Architecture& arch, std::uint64_t seed) : arch_(arch) {
    Rng rng = make_stream(seed, "init");
    net_ = GraphReadout<GraphLayer>("net", arch.input_dim, arch.output_dim, arch, rng);
  }

  const Architecture& architecture() const { return arch_; }

  Eigen::VectorXd predict(const SparseShift& shift, const Matrix<double>& x) {
    return net_.forward(shift, x).transpose();
  }

  /// Sum over label rows of ||y_hat - y||^2; accumulates gradients when asked.
  double loss(const SparseShift& shift, const Matrix<double>& x, const Eigen::MatrixXd& labels,
              bool accumulate) {
    const RowVector<double> y_hat = net_.forward(shift, x);
    RowVector<double> dy = RowVector<double>::Zero(y_hat.cols());
    double total = 0;
    for (Index l = 0; l < labels.rows(); ++l) {
      const RowVector<double> diff = y_hat - labels.row(l);
      total += diff.squaredNorm();
      dy += 2.0 * diff;
    }
    if (accumulate) net_.backward(shift, dy);
    return total;
  }

  GraphReadout<GraphLayer>& network() { return net_; }
  ParameterList<double> parameters() { return net_.parameters(); }

 private:
  Architecture arch_;
  GraphReadout<GraphLayer> net_;
};

using GnnRegressor = GraphRegressor<kernel::GraphConv<double>>;
using GatRegressor = GraphRegressor<kernel::GatLayer<double>>;

/// 0.5 * sum_j (mu_j^2 + sigma_j^2 - 1 - log sigma_j^2): KL of N(mu, diag sigma^2) to N(0, I).
double gaussian_kl(const RowVector<double>& mu, const RowVector<double>& log_var);

struct ElboTerms {
  double loss = 0;  // KL + mean reconstruction
  double kl = 0;
  double reconstruction = 0;
};

/// Conditional VAE with graph-convolution encoder and decoder. The encoder
/// reads [x | y] on every node, the decoder reads [x | tau].
class GnnCvae {
 public:
  GnnCvae() = default;
  GnnCvae(const Architecture& arch, std::uint64_t seed);

  const Architecture& architecture() const { return arch_; }
  int latent_dim() const { return arch_.latent_dim; }

  struct Encoding {
    RowVector<double> mu, log_var;
  };
  Encoding encode(const SparseShift& shift, const Matrix<double>& x, const RowVector<double>& y);
  RowVector<double> decode(const SparseShift& shift, const Matrix<double>& x,
                           const RowVector<double>& tau);

  /// Negative ELBO for one label with reparameterized latents
  /// tau_i = mu + sigma * noise.row(i). Reconstruction is 0.5*||y - y_hat||^2
  /// averaged over rows of `noise`. Accumulates gradients when asked.
  ElboTerms negative_elbo(const SparseShift& shift, const Matrix<double>& x,
                          const RowVector<double>& y, const Matrix<double>& noise, bool accumulate);

  /// Sum of negative_elbo over label rows, one noise block of `samples` rows per label.
  double loss(const SparseShift& shift, const Matrix<double>& x, const Eigen::MatrixXd& labels,
              Rng& noise_rng, int samples, bool accumulate);

  /// Decoder output at the prior mean.
  Eigen::VectorXd predict(const SparseShift& shift, const Matrix<double>& x);

  GraphReadout<kernel::GraphConv<double>>& encoder() { return encoder_; }
  GraphReadout<kernel::GraphConv<double>>& decoder() { return decoder_; }
  ParameterList<double> parameters();

 private:
  Architecture arch_;
  GraphReadout<kernel::GraphConv<double>> encoder_, decoder_;
};

/// n decoder outputs (rows) from i.i.d. standard-normal latents.
Eigen::MatrixXd sample_critical_distribution(GnnCvae& cvae, const SparseShift& shift,
                                             const Matrix<double>& x, int n, std::uint64_t seed);

/// max(0, 1 - mean ||y_hat - y||^2).
double accuracy(const std::vector<Eigen::VectorXd>& predictions,
                const std::vector<Eigen::VectorXd>& labels);

/// Predicts the training-label mean everywhere.
struct ConstantPredictor {
  Eigen::VectorXd mean;
};

// --- training -------------------------------------------------------------

/// One graph-supported example: features on a shift operator plus one or
/// more label rows that share them.
struct GraphSample {
  std::shared_ptr<const SparseShift> shift;
  FeatureMatrix features;
  Eigen::MatrixXd labels;  // L x d
};

ConstantPredictor fit_constant(const std::vector<GraphSample>& train);

struct TrainOptions {
  int batch_size = 8;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  int latent_samples = 1;
};

struct LossCurve {
  std::vector<double> train;
  std::vector<double> validation;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch)
      : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

/// Model plus optimizer state. Epoch e shuffles with stream ("shuffle", e)
/// and draws latent noise from ("latent", e), so a restored trainer continues
/// exactly like an uninterrupted one.
template <class Model>
class Trainer {
 public:
  Trainer(Model model, TrainOptions options)
      : model_(std::make_unique<Model>(std::move(model))), options_(options),
        optimizer_(model_->parameters(), kernel::AdamOptions{options.learning_rate}) {}

  Model& model() { return *model_; }
  const LossCurve& curve() const { return curve_; }
  int epoch() const { return epoch_; }
  const TrainOptions& options() const { return options_; }

  /// Runs `epochs` more epochs; returns the curve so far.
  const LossCurve& train(const std::vector<GraphSample>& train_set,
                         const std::vector<GraphSample>& validation_set, int epochs);

  /// Mean per-label loss without updating parameters.
  double evaluate(const std::vector<GraphSample>& samples, std::uint64_t noise_index);

  nlohmann::json checkpoint();
  static Trainer restore(const nlohmann::json& doc);

 private:
  double sample_loss(const GraphSample& s, Rng& noise, bool accumulate);

  std::unique_ptr<Model> model_;  // stable parameter addresses for the optimizer
  TrainOptions options_;
  kernel::Adam<double> optimizer_;
  LossCurve curve_;
  int epoch_ = 0;
};

extern template class Trainer<GnnRegressor>;
extern template class Trainer<GatRegressor>;
extern template class Trainer<GnnCvae>;

}  // namespace gnnmp
