#pragma once

#include "agfn/types.hpp"

#include <vector>

namespace agfn {

// Checked dense product. Eigen only asserts in debug builds; callers here get
// a ShapeError in every build mode.
Mat matmul(const Mat& a, const Mat& b);

// Numerically stable softmax (max subtraction). Output is nonnegative and
// sums to 1 within 1e-12. Empty input is a domain error.
Vec softmax(const Vec& v);

// Elementwise logistic function, stable for large |x|.
double sigmoid_scalar(double x);
Vec sigmoid(const Vec& v);

// Sample Pearson correlation. Returns exactly 0 when either input has zero
// variance so downstream diagnostics stay defined on constant errors.
double pearson(const Vec& x, const Vec& y);

// Shannon entropy (nats) of softmax(h). Requires dim >= 2; range [0, ln d].
double feature_entropy(const Vec& h);
// Gradient of feature_entropy w.r.t. h.
Vec feature_entropy_grad(const Vec& h);

// Scales the gradient set in place so the global L2 norm does not exceed
// max_norm. Returns the applied scale factor (1 when already within bounds).
double global_norm_clip(std::vector<Mat*>& grads, double max_norm);
double global_norm(const std::vector<Mat*>& grads);

}  // namespace agfn
