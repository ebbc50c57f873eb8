#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gnnmp::kernel {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using SparseOp = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

using Index = Eigen::Index;

/// Trainable tensor with its gradient accumulator.
template <class Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Parameter() = default;
  Parameter(std::string n, Matrix<Scalar> v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix<Scalar>::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <class Scalar>
using ParameterList = std::vector<Parameter<Scalar>*>;

template <class Scalar>
void zero_grads(const ParameterList<Scalar>& params) {
  for (auto* p : params) p->zero_grad();
}

template <class Scalar, class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.derived().array().isFinite().all();
}

/// Uniform Glorot initialization for an in x out weight.
template <class Scalar, class Rng>
Matrix<Scalar> glorot(Index in, Index out, Rng& rng, Scalar gain = Scalar(1)) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix<Scalar> w(in, out);
  for (Index j = 0; j < out; ++j)
    for (Index i = 0; i < in; ++i) w(i, j) = static_cast<Scalar>(dist(rng));
  return w;
}

/// Exact sparse-dense product S x.
template <class Scalar, class Derived>
Matrix<Scalar> shift_apply(const SparseOp<Scalar>& shift, const Eigen::MatrixBase<Derived>& x) {
  if (shift.rows() != shift.cols() || shift.cols() != x.rows())
    throw std::domain_error("shift operator and signal shapes do not match");
  return shift * x;
}

/// z = sum_k S^k x H_k, with each power formed by repeated shift_apply.
template <class Scalar, class Derived>
Matrix<Scalar> graph_filter(const SparseOp<Scalar>& shift, const Eigen::MatrixBase<Derived>& x,
                            const std::vector<Matrix<Scalar>>& taps) {
  if (taps.empty()) throw std::domain_error("graph filter needs at least one tap");
  Matrix<Scalar> power = x;
  if (taps.front().rows() != x.cols()) throw std::domain_error("filter tap width mismatch");
  Matrix<Scalar> z = power * taps.front();
  for (std::size_t k = 1; k < taps.size(); ++k) {
    power = shift_apply(shift, power);
    z.noalias() += power * taps[k];
  }
  return z;
}

}  // namespace gnnmp::kernel
