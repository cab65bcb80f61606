#pragma once

#include "agfn/autograd.hpp"
#include "agfn/types.hpp"

namespace agfn {

// y = x W^T + 1 b^T over batch rows. W is (out, in), b is (out, 1).
class Affine : public Layer {
 public:
  Affine(std::string name, Index in_dim, Index out_dim, Rng& init);
  Affine(std::string name, Mat w, Mat b);

  std::string_view kind() const override { return "affine"; }
  std::vector<Param*> params() override { return {&w_, &b_}; }

  Index in_dim() const { return w_.value.cols(); }
  Index out_dim() const { return w_.value.rows(); }

  // Pure evaluation, shared with the cached path.
  Mat value(const Mat& x) const;
  // Pure reverse pass at an explicit input.
  Mat vjp(const Mat& x, const Mat& grad_out, bool accumulate_param_grads);

 protected:
  Mat forward_impl(const Mat& x) override;
  Mat backward_impl(const Mat& grad_out) override;

 private:
  Param w_;
  Param b_;
  Mat cached_input_;
};

class TanhLayer : public Layer {
 public:
  std::string_view kind() const override { return "tanh"; }

  static Mat value(const Mat& x) { return x.array().tanh().matrix(); }

 protected:
  Mat forward_impl(const Mat& x) override;
  Mat backward_impl(const Mat& grad_out) override;

 private:
  Mat cached_output_;
};

// L x d -> 1 x d column means.
class MeanPool : public Layer {
 public:
  std::string_view kind() const override { return "mean_pool"; }

  static Mat value(const Mat& x) { return x.colwise().mean(); }

 protected:
  Mat forward_impl(const Mat& x) override;
  Mat backward_impl(const Mat& grad_out) override;

 private:
  Index cached_rows_ = 0;
};

// Xavier-uniform initialization, filled in row-major order from the stream.
Mat xavier_uniform(Index rows, Index cols, Index fan_in, Index fan_out, Rng& rng);

}  // namespace agfn
