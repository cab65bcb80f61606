#pragma once

#include "agfn/rng.hpp"
#include "agfn/types.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace agfn {

// Named parameter with its accumulated gradient. Frozen parameters are still
// differentiated (the checker covers them) but skipped by the optimizer.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  bool trainable = true;

  Param() = default;
  Param(std::string n, Mat v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())), trainable(train) {}

  void zero_grad() { grad.setZero(); }
};

// Reverse-mode layer contract. forward caches whatever backward needs;
// backward may run at most once per forward, accumulates parameter gradients
// and returns the gradient w.r.t. the input.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string_view kind() const = 0;
  virtual std::vector<Param*> params() { return {}; }

  Mat forward(const Mat& x);
  Mat backward(const Mat& grad_out);

  void zero_grads();

 protected:
  virtual Mat forward_impl(const Mat& x) = 0;
  virtual Mat backward_impl(const Mat& grad_out) = 0;

 private:
  bool has_state_ = false;
  Index out_rows_ = 0;
  Index out_cols_ = 0;
};

// Differentiable scalar field R^d -> R with a pure (cache-free) evaluation
// contract, used where Layer state would get in the way, e.g. the adversarial
// perturbation search evaluating the prediction head at probe points.
class ScalarField {
 public:
  virtual ~ScalarField() = default;
  virtual double value(const Vec& u) const = 0;
  // Returns dy * df/du; optionally accumulates parameter gradients.
  virtual Vec vjp(const Vec& u, double dy, bool accumulate_param_grads) = 0;

  Vec gradient(const Vec& u) { return vjp(u, 1.0, false); }
};

struct GradReport {
  double max_param_rel_error = 0.0;
  double max_input_rel_error = 0.0;

  double worst() const {
    return max_param_rel_error > max_input_rel_error ? max_param_rel_error : max_input_rel_error;
  }
};

// Central-difference check of a layer's backward pass. Projects the output
// onto a fixed random weighting so the loss is scalar, then compares the
// analytic input/parameter gradients against (f(x+h)-f(x-h))/2h per
// coordinate. Relative error uses max(1, |a|, |n|) as denominator.
GradReport grad_check(Layer& layer, const Mat& input, Rng& rng, double h = 1e-5);

}  // namespace agfn
