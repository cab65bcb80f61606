#include "agfn/encoders.hpp"

#include <cmath>

namespace agfn {

Encoder::Encoder(std::string name, Index in_dim, Index out_dim, Rng& init)
    : proj_(std::move(name), in_dim, out_dim, init) {}

Mat Encoder::forward_impl(const Mat& x) {
  return act_.forward(proj_.forward(pool_.forward(x)));
}

Mat Encoder::backward_impl(const Mat& grad_out) {
  return pool_.backward(proj_.backward(act_.backward(grad_out)));
}

CrossAttention::CrossAttention(std::string name, Index dim, Index query_rows, Rng& init)
    : wq_(name + ".Wq", xavier_uniform(dim, dim, dim, dim, init)),
      wk_(name + ".Wk", xavier_uniform(dim, dim, dim, dim, init)),
      wv_(name + ".Wv", xavier_uniform(dim, dim, dim, dim, init)),
      query_rows_(query_rows) {
  require_shape(query_rows_ >= 1, "cross_attention: query_rows must be >= 1");
}

Mat CrossAttention::pack(const Mat& q_seq, const Mat& kv_seq) {
  require_shape(q_seq.cols() == kv_seq.cols(), "cross_attention: model dims differ");
  Mat packed(q_seq.rows() + kv_seq.rows(), q_seq.cols());
  packed.topRows(q_seq.rows()) = q_seq;
  packed.bottomRows(kv_seq.rows()) = kv_seq;
  return packed;
}

Mat CrossAttention::attend(const Mat& q_seq, const Mat& kv_seq) {
  const Index d = dim();
  require_shape(q_seq.cols() == d && kv_seq.cols() == d, "cross_attention: input dim != model dim");
  require_shape(kv_seq.rows() >= 1, "cross_attention: empty key/value sequence");

  q_seq_ = q_seq;
  kv_seq_ = kv_seq;
  q_.noalias() = q_seq * wq_.value.transpose();
  k_.noalias() = kv_seq * wk_.value.transpose();
  v_.noalias() = kv_seq * wv_.value.transpose();

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Mat scores = q_ * k_.transpose() * scale;
  attn_.resize(scores.rows(), scores.cols());
  for (Index i = 0; i < scores.rows(); ++i) {
    const double m = scores.row(i).maxCoeff();
    Eigen::ArrayXd e = (scores.row(i).array() - m).exp();
    attn_.row(i) = (e / e.sum()).matrix();
  }
  return q_seq + attn_ * v_;
}

std::pair<Mat, Mat> CrossAttention::attend_backward(const Mat& grad_out) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim()));

  Mat d_attn = grad_out * v_.transpose();
  Mat d_v = attn_.transpose() * grad_out;

  // Row-wise softmax Jacobian.
  Mat d_scores(attn_.rows(), attn_.cols());
  for (Index i = 0; i < attn_.rows(); ++i) {
    const double dot = d_attn.row(i).dot(attn_.row(i));
    d_scores.row(i) = (attn_.row(i).array() * (d_attn.row(i).array() - dot)).matrix();
  }
  d_scores *= scale;

  Mat d_q = d_scores * k_;
  Mat d_k = d_scores.transpose() * q_;

  wq_.grad.noalias() += d_q.transpose() * q_seq_;
  wk_.grad.noalias() += d_k.transpose() * kv_seq_;
  wv_.grad.noalias() += d_v.transpose() * kv_seq_;

  Mat d_q_seq = grad_out + d_q * wq_.value;  // residual path
  Mat d_kv_seq = d_k * wk_.value + d_v * wv_.value;
  return {std::move(d_q_seq), std::move(d_kv_seq)};
}

Mat CrossAttention::forward_impl(const Mat& x) {
  require_shape(x.rows() > query_rows_, "cross_attention: packed input needs key rows after the queries");
  return attend(x.topRows(query_rows_), x.bottomRows(x.rows() - query_rows_));
}

Mat CrossAttention::backward_impl(const Mat& grad_out) {
  auto [dq, dkv] = attend_backward(grad_out);
  Mat dx(dq.rows() + dkv.rows(), dq.cols());
  dx.topRows(dq.rows()) = dq;
  dx.bottomRows(dkv.rows()) = dkv;
  return dx;
}

}  // namespace agfn
