#include "agfn/autograd.hpp"

#include <cmath>
#include <string>

namespace agfn {

Mat Layer::forward(const Mat& x) {
  Mat out = forward_impl(x);
  has_state_ = true;
  out_rows_ = out.rows();
  out_cols_ = out.cols();
  return out;
}

Mat Layer::backward(const Mat& grad_out) {
  if (!has_state_) {
    throw StateError(std::string(kind()) + ": backward called without a preceding forward");
  }
  require_shape(grad_out.rows() == out_rows_ && grad_out.cols() == out_cols_,
                std::string(kind()) + ": grad_out shape does not match forward output");
  has_state_ = false;
  return backward_impl(grad_out);
}

void Layer::zero_grads() {
  for (Param* p : params()) p->zero_grad();
}

namespace {

double rel_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

double weighted_output(Layer& layer, const Mat& x, const Mat& weights) {
  return (layer.forward(x).array() * weights.array()).sum();
}

}  // namespace

GradReport grad_check(Layer& layer, const Mat& input, Rng& rng, double h) {
  if (h <= 0.0) throw std::domain_error("grad_check: h must be positive");

  // Analytic pass first: the loss is sum(output .* W) for a fixed random W,
  // whose gradient w.r.t. the output is W itself.
  layer.zero_grads();
  Mat out = layer.forward(input);
  const Mat weights = rng.uniform_matrix(out.rows(), out.cols(), -1.0, 1.0);
  const Mat analytic_input_grad = layer.backward(weights);

  std::vector<Mat> analytic_param_grads;
  for (Param* p : layer.params()) analytic_param_grads.push_back(p->grad);

  GradReport report;

  Mat x = input;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      const double saved = x(i, j);
      x(i, j) = saved + h;
      const double up = weighted_output(layer, x, weights);
      x(i, j) = saved - h;
      const double down = weighted_output(layer, x, weights);
      x(i, j) = saved;
      const double numeric = (up - down) / (2.0 * h);
      report.max_input_rel_error =
          std::max(report.max_input_rel_error, rel_error(analytic_input_grad(i, j), numeric));
    }
  }

  const auto params = layer.params();
  for (std::size_t k = 0; k < params.size(); ++k) {
    Mat& value = params[k]->value;
    for (Index i = 0; i < value.rows(); ++i) {
      for (Index j = 0; j < value.cols(); ++j) {
        const double saved = value(i, j);
        value(i, j) = saved + h;
        const double up = weighted_output(layer, input, weights);
        value(i, j) = saved - h;
        const double down = weighted_output(layer, input, weights);
        value(i, j) = saved;
        const double numeric = (up - down) / (2.0 * h);
        report.max_param_rel_error =
            std::max(report.max_param_rel_error, rel_error(analytic_param_grads[k](i, j), numeric));
      }
    }
  }

  return report;
}

}  // namespace agfn
