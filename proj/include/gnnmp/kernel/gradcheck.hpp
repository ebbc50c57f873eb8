#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "gnnmp/kernel/tensor.hpp"

namespace gnnmp::kernel {

struct TensorGradientError {
  std::string name;
  double relative_error = 0;
};

struct GradientReport {
  std::vector<TensorGradientError> tensors;
  double max_relative_error = 0;
  std::string worst;

  bool passed(double tolerance) const { return max_relative_error <= tolerance; }
};

/// Compares analytic gradients against central finite differences.
///
/// `loss` evaluates the scalar fragment from the current values of `targets`.
/// `backward` zeroes and refills every target's `grad`. Inputs are checked by
/// wrapping them as parameters. The error of a tensor is
/// max_i |analytic_i - numeric_i| / max(max_i |analytic_i|, max_i |numeric_i|).
template <class Scalar>
GradientReport check_gradients(const std::function<Scalar()>& loss,
                               const std::function<void()>& backward,
                               const ParameterList<Scalar>& targets, double step = 1e-5) {
  backward();
  std::vector<Matrix<Scalar>> analytic;
  for (auto* t : targets) analytic.push_back(t->grad);

  GradientReport report;
  for (std::size_t ti = 0; ti < targets.size(); ++ti) {
    Parameter<Scalar>& target = *targets[ti];
    Matrix<Scalar> numeric(target.value.rows(), target.value.cols());
    for (Index i = 0; i < target.value.size(); ++i) {
      Scalar& v = target.value.data()[i];
      const Scalar saved = v;
      v = saved + step;
      const double plus = loss();
      v = saved - step;
      const double minus = loss();
      v = saved;
      numeric.data()[i] = static_cast<Scalar>((plus - minus) / (2.0 * step));
    }
    const double scale = std::max(analytic[ti].cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff());
    const double diff = (analytic[ti] - numeric).cwiseAbs().maxCoeff();
    const double rel = scale > 0 ? diff / scale : 0.0;
    report.tensors.push_back({target.name, rel});
    if (rel > report.max_relative_error || report.worst.empty()) {
      if (rel >= report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst = target.name;
      }
    }
  }
  return report;
}

}  // namespace gnnmp::kernel
