#pragma once

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "gnnmp/kernel/tensor.hpp"

// Layers cache what their backward pass needs during forward; each forward
// must be followed by at most one backward before the next forward.
namespace gnnmp::kernel {

/// Row-wise affine map y = x W + b.
template <class Scalar = double>
class Dense {
 public:
  Dense() = default;
  template <class Rng>
  Dense(const std::string& name, Index in, Index out, Rng& rng)
      : weight_(name + ".weight", glorot<Scalar>(in, out, rng)),
        bias_(name + ".bias", Matrix<Scalar>::Zero(1, out)) {}

  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    if (x.cols() != weight_.value.rows()) throw std::domain_error("dense input width mismatch");
    input_ = x;
    Matrix<Scalar> y = x * weight_.value;
    y.rowwise() += bias_.value.row(0);
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy) {
    weight_.grad.noalias() += input_.transpose() * dy;
    bias_.grad += dy.colwise().sum();
    return dy * weight_.value.transpose();
  }

  Parameter<Scalar>& weight() { return weight_; }
  Parameter<Scalar>& bias() { return bias_; }
  ParameterList<Scalar> parameters() { return {&weight_, &bias_}; }

 private:
  Parameter<Scalar> weight_, bias_;
  Matrix<Scalar> input_;
};

template <class Scalar = double>
class Tanh {
 public:
  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    output_ = x.array().tanh().matrix();
    return output_;
  }
  Matrix<Scalar> backward(const Matrix<Scalar>& dy) const {
    return (dy.array() * (Scalar(1) - output_.array().square())).matrix();
  }

 private:
  Matrix<Scalar> output_;
};

/// K-th order polynomial graph filter z = sum_k S^k x H_k.
template <class Scalar = double>
class GraphConv {
 public:
  GraphConv() = default;
  template <class Rng>
  GraphConv(const std::string& name, Index in, Index out, Index order, Rng& rng) {
    if (order < 0) throw std::invalid_argument("filter order must be non-negative");
    const Scalar gain = Scalar(1) / std::sqrt(static_cast<Scalar>(order + 1));
    for (Index k = 0; k <= order; ++k)
      taps_.emplace_back(name + ".tap" + std::to_string(k), glorot<Scalar>(in, out, rng, gain));
  }

  Index order() const { return static_cast<Index>(taps_.size()) - 1; }
  Index input_dim() const { return taps_.front().value.rows(); }
  Index output_dim() const { return taps_.front().value.cols(); }

  Matrix<Scalar> forward(const SparseOp<Scalar>& shift, const Matrix<Scalar>& x) {
    if (x.cols() != input_dim()) throw std::domain_error("graph conv input width mismatch");
    powers_.resize(taps_.size());
    powers_[0] = x;
    Matrix<Scalar> z = x * taps_[0].value;
    for (std::size_t k = 1; k < taps_.size(); ++k) {
      powers_[k] = shift_apply(shift, powers_[k - 1]);
      z.noalias() += powers_[k] * taps_[k].value;
    }
    return z;
  }

  Matrix<Scalar> backward(const SparseOp<Scalar>& shift, const Matrix<Scalar>& dz) {
    for (std::size_t k = 0; k < taps_.size(); ++k)
      taps_[k].grad.noalias() += powers_[k].transpose() * dz;
    // dx = sum_k (S^T)^k dz H_k^T, evaluated Horner-style.
    Matrix<Scalar> g = dz * taps_.back().value.transpose();
    for (std::size_t k = taps_.size() - 1; k-- > 0;) {
      Matrix<Scalar> next = shift.transpose() * g;
      next.noalias() += dz * taps_[k].value.transpose();
      g = std::move(next);
    }
    return g;
  }

  std::vector<Parameter<Scalar>>& taps() { return taps_; }
  ParameterList<Scalar> parameters() {
    ParameterList<Scalar> out;
    for (auto& t : taps_) out.push_back(&t);
    return out;
  }

 private:
  std::vector<Parameter<Scalar>> taps_;
  std::vector<Matrix<Scalar>> powers_;
};

/// Single-head graph attention over the shift's sparsity pattern plus
/// self-loops.
template <class Scalar = double>
class GatLayer {
 public:
  GatLayer() = default;
  template <class Rng>
  GatLayer(const std::string& name, Index in, Index out, Rng& rng, Scalar negative_slope = Scalar(0.2))
      : weight_(name + ".weight", glorot<Scalar>(in, out, rng)),
        attention_(name + ".attention", glorot<Scalar>(2 * out, 1, rng)),
        slope_(negative_slope) {}

  Index input_dim() const { return weight_.value.rows(); }
  Index output_dim() const { return weight_.value.cols(); }
  Scalar negative_slope() const { return slope_; }

  Matrix<Scalar> forward(const SparseOp<Scalar>& shift, const Matrix<Scalar>& x) {
    if (x.cols() != input_dim()) throw std::domain_error("attention input width mismatch");
    if (shift.rows() != x.rows() || shift.cols() != x.rows())
      throw std::domain_error("shift operator and signal shapes do not match");
    const Index n = x.rows();
    const Index f = output_dim();
    input_ = x;
    hidden_ = x * weight_.value;
    const Vector<Scalar> s_self = hidden_ * attention_.value.topRows(f);
    const Vector<Scalar> s_other = hidden_ * attention_.value.bottomRows(f);

    offsets_.assign(static_cast<std::size_t>(n + 1), 0);
    cols_.clear();
    pre_.clear();
    alpha_.clear();
    Matrix<Scalar> out = Matrix<Scalar>::Zero(n, f);
    for (Index i = 0; i < n; ++i) {
      const std::size_t begin = cols_.size();
      cols_.push_back(i);
      for (typename SparseOp<Scalar>::InnerIterator it(shift, i); it; ++it)
        if (it.col() != i && it.value() != Scalar(0)) cols_.push_back(it.col());
      Scalar max_score = -std::numeric_limits<Scalar>::infinity();
      for (std::size_t e = begin; e < cols_.size(); ++e) {
        const Scalar pre = s_self(i) + s_other(cols_[e]);
        pre_.push_back(pre);
        const Scalar score = pre > 0 ? pre : slope_ * pre;
        alpha_.push_back(score);
        max_score = std::max(max_score, score);
      }
      Scalar total = 0;
      for (std::size_t e = begin; e < cols_.size(); ++e) {
        alpha_[e] = std::exp(alpha_[e] - max_score);
        total += alpha_[e];
      }
      for (std::size_t e = begin; e < cols_.size(); ++e) {
        alpha_[e] /= total;
        out.row(i) += alpha_[e] * hidden_.row(cols_[e]);
      }
      offsets_[static_cast<std::size_t>(i + 1)] = cols_.size();
    }
    return out;
  }

  Matrix<Scalar> backward(const SparseOp<Scalar>&, const Matrix<Scalar>& dout) {
    const Index n = hidden_.rows();
    const Index f = output_dim();
    Matrix<Scalar> dh = Matrix<Scalar>::Zero(n, f);
    Vector<Scalar> ds_self = Vector<Scalar>::Zero(n);
    Vector<Scalar> ds_other = Vector<Scalar>::Zero(n);
    std::vector<Scalar> dalpha;
    for (Index i = 0; i < n; ++i) {
      const std::size_t begin = offsets_[static_cast<std::size_t>(i)];
      const std::size_t end = offsets_[static_cast<std::size_t>(i + 1)];
      dalpha.assign(end - begin, Scalar(0));
      Scalar weighted = 0;
      for (std::size_t e = begin; e < end; ++e) {
        dh.row(cols_[e]) += alpha_[e] * dout.row(i);
        dalpha[e - begin] = dout.row(i).dot(hidden_.row(cols_[e]));
        weighted += alpha_[e] * dalpha[e - begin];
      }
      for (std::size_t e = begin; e < end; ++e) {
        const Scalar dscore = alpha_[e] * (dalpha[e - begin] - weighted);
        const Scalar dpre = pre_[e] > 0 ? dscore : slope_ * dscore;
        ds_self(i) += dpre;
        ds_other(cols_[e]) += dpre;
      }
    }
    attention_.grad.topRows(f).noalias() += hidden_.transpose() * ds_self;
    attention_.grad.bottomRows(f).noalias() += hidden_.transpose() * ds_other;
    dh.noalias() += ds_self * attention_.value.topRows(f).transpose();
    dh.noalias() += ds_other * attention_.value.bottomRows(f).transpose();
    weight_.grad.noalias() += input_.transpose() * dh;
    return dh * weight_.value.transpose();
  }

  /// Attention weights of node i from the last forward, as (neighbor, weight).
  std::vector<std::pair<Index, Scalar>> attention_of(Index i) const {
    std::vector<std::pair<Index, Scalar>> out;
    for (std::size_t e = offsets_[static_cast<std::size_t>(i)];
         e < offsets_[static_cast<std::size_t>(i + 1)]; ++e)
      out.emplace_back(cols_[e], alpha_[e]);
    return out;
  }

  Parameter<Scalar>& weight() { return weight_; }
  Parameter<Scalar>& attention() { return attention_; }
  ParameterList<Scalar> parameters() { return {&weight_, &attention_}; }

 private:
  Parameter<Scalar> weight_, attention_;
  Scalar slope_ = Scalar(0.2);
  Matrix<Scalar> input_, hidden_;
  std::vector<std::size_t> offsets_;
  std::vector<Index> cols_;
  std::vector<Scalar> pre_, alpha_;
};

/// Per-feature maximum over nodes; gradient flows to the first argmax row.
template <class Scalar = double>
class GraphMaxPool {
 public:
  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    if (x.rows() < 1) throw std::domain_error("maxpool over an empty node set");
    rows_ = x.rows();
    argmax_.resize(x.cols());
    Matrix<Scalar> out(1, x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
      Index best = 0;
      for (Index i = 1; i < x.rows(); ++i)
        if (x(i, j) > x(best, j)) best = i;
      argmax_(j) = best;
      out(0, j) = x(best, j);
    }
    return out;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& dy) const {
    Matrix<Scalar> dx = Matrix<Scalar>::Zero(rows_, dy.cols());
    for (Index j = 0; j < dy.cols(); ++j) dx(argmax_(j), j) = dy(0, j);
    return dx;
  }

 private:
  Index rows_ = 0;
  Eigen::Matrix<Index, Eigen::Dynamic, 1> argmax_;
};

template <class Scalar, class Derived>
Matrix<Scalar> graph_maxpool(const Eigen::MatrixBase<Derived>& x) {
  GraphMaxPool<Scalar> pool;
  return pool.forward(x);
}

}  // namespace gnnmp::kernel
