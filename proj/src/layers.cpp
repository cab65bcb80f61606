#include "agfn/layers.hpp"

#include <cmath>

namespace agfn {

Mat xavier_uniform(Index rows, Index cols, Index fan_in, Index fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return rng.uniform_matrix(rows, cols, -bound, bound);
}

Affine::Affine(std::string name, Index in_dim, Index out_dim, Rng& init)
    : w_(name + ".W", xavier_uniform(out_dim, in_dim, in_dim, out_dim, init)),
      b_(name + ".b", Mat::Zero(out_dim, 1)) {}

Affine::Affine(std::string name, Mat w, Mat b) : w_(name + ".W", std::move(w)), b_(name + ".b", std::move(b)) {
  require_shape(b_.value.cols() == 1 && b_.value.rows() == w_.value.rows(), "affine: bias shape");
}

Mat Affine::value(const Mat& x) const {
  require_shape(x.cols() == w_.value.cols(), "affine: input width != W columns");
  return (x * w_.value.transpose()).rowwise() + b_.value.col(0).transpose();
}

Mat Affine::vjp(const Mat& x, const Mat& grad_out, bool accumulate_param_grads) {
  if (accumulate_param_grads) {
    w_.grad.noalias() += grad_out.transpose() * x;
    b_.grad.col(0).noalias() += grad_out.colwise().sum().transpose();
  }
  return grad_out * w_.value;
}

Mat Affine::forward_impl(const Mat& x) {
  cached_input_ = x;
  return value(x);
}

Mat Affine::backward_impl(const Mat& grad_out) {
  return vjp(cached_input_, grad_out, true);
}

Mat TanhLayer::forward_impl(const Mat& x) {
  cached_output_ = value(x);
  return cached_output_;
}

Mat TanhLayer::backward_impl(const Mat& grad_out) {
  return (grad_out.array() * (1.0 - cached_output_.array().square())).matrix();
}

Mat MeanPool::forward_impl(const Mat& x) {
  require_shape(x.rows() >= 1, "mean_pool: empty input");
  cached_rows_ = x.rows();
  return value(x);
}

Mat MeanPool::backward_impl(const Mat& grad_out) {
  const double inv = 1.0 / static_cast<double>(cached_rows_);
  Mat gx(cached_rows_, grad_out.cols());
  gx = (grad_out * inv).replicate(cached_rows_, 1);
  return gx;
}

}  // namespace agfn
