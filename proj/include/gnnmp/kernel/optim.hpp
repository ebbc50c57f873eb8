#pragma once

#include <cmath>
#include <vector>

#include <json.hpp>

#include "gnnmp/kernel/tensor.hpp"

namespace gnnmp::kernel {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First-order optimizer with momentum and per-coordinate second-moment
/// scaling. Moments are kept per parameter in the order given at construction.
template <class Scalar = double>
class Adam {
 public:
  Adam() = default;
  Adam(ParameterList<Scalar> params, AdamOptions options = {})
      : params_(std::move(params)), options_(options) {
    for (auto* p : params_) {
      first_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      second_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  /// Applies one update using the accumulated gradients scaled by `grad_scale`.
  void step(Scalar grad_scale = Scalar(1)) {
    ++steps_;
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const Matrix<Scalar> g = params_[i]->grad * grad_scale;
      first_[i] = options_.beta1 * first_[i] + (1.0 - options_.beta1) * g;
      second_[i] = options_.beta2 * second_[i] + (1.0 - options_.beta2) * g.cwiseProduct(g);
      params_[i]->value.array() -=
          options_.learning_rate * (first_[i].array() / c1) /
          ((second_[i].array() / c2).sqrt() + options_.epsilon);
    }
  }

  long steps() const { return steps_; }
  const AdamOptions& options() const { return options_; }

  nlohmann::json state() const {
    nlohmann::json doc;
    doc["steps"] = steps_;
    doc["learning_rate"] = options_.learning_rate;
    doc["beta1"] = options_.beta1;
    doc["beta2"] = options_.beta2;
    doc["epsilon"] = options_.epsilon;
    doc["first"] = nlohmann::json::object();
    doc["second"] = nlohmann::json::object();
    for (std::size_t i = 0; i < params_.size(); ++i) {
      doc["first"][params_[i]->name] = flatten(first_[i]);
      doc["second"][params_[i]->name] = flatten(second_[i]);
    }
    return doc;
  }

  void restore(const nlohmann::json& doc) {
    steps_ = doc.at("steps").get<long>();
    options_.learning_rate = doc.at("learning_rate").get<double>();
    options_.beta1 = doc.at("beta1").get<double>();
    options_.beta2 = doc.at("beta2").get<double>();
    options_.epsilon = doc.at("epsilon").get<double>();
    for (std::size_t i = 0; i < params_.size(); ++i) {
      unflatten(doc.at("first").at(params_[i]->name), first_[i]);
      unflatten(doc.at("second").at(params_[i]->name), second_[i]);
    }
  }

 private:
  static nlohmann::json flatten(const Matrix<Scalar>& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) out.push_back(static_cast<double>(m(r, c)));
    return out;
  }
  static void unflatten(const nlohmann::json& data, Matrix<Scalar>& m) {
    if (data.size() != static_cast<std::size_t>(m.size()))
      throw std::invalid_argument("optimizer state size mismatch");
    std::size_t k = 0;
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<Scalar>(data[k++].get<double>());
  }

  ParameterList<Scalar> params_;
  AdamOptions options_;
  std::vector<Matrix<Scalar>> first_, second_;
  long steps_ = 0;
};

}  // namespace gnnmp::kernel
