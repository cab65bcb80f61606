#pragma once

#include "agfn/layers.hpp"

namespace agfn {

// Unimodal representations sharing dimension d, packed as rows (T, A, V).
struct EncodedTriple {
  Vec text;
  Vec audio;
  Vec visual;

  Index dim() const { return text.size(); }

  Mat packed() const {
    Mat m(3, text.size());
    m.row(0) = text.transpose();
    m.row(1) = audio.transpose();
    m.row(2) = visual.transpose();
    return m;
  }
  static EncodedTriple from_packed(const Mat& m) {
    require_shape(m.rows() == 3, "EncodedTriple: expected 3 rows");
    return {m.row(0).transpose(), m.row(1).transpose(), m.row(2).transpose()};
  }
};

// Sequence encoder: mean-pool over rows, affine d_in -> d, tanh.
// Input L x d_in, output 1 x d.
class Encoder : public Layer {
 public:
  Encoder(std::string name, Index in_dim, Index out_dim, Rng& init);

  std::string_view kind() const override { return "encoder"; }
  std::vector<Param*> params() override { return proj_.params(); }

  Index in_dim() const { return proj_.in_dim(); }
  Index out_dim() const { return proj_.out_dim(); }

 protected:
  Mat forward_impl(const Mat& x) override;
  Mat backward_impl(const Mat& grad_out) override;

 private:
  MeanPool pool_;
  Affine proj_;
  TanhLayer act_;
};

// Single-head scaled dot-product attention with learned Q/K/V projections and
// a residual connection: out = q_seq + softmax(Q K^T / sqrt(d)) V.
// The layer input packs query rows on top of key/value rows; query_rows is
// fixed at construction so the packed form is unambiguous.
class CrossAttention : public Layer {
 public:
  CrossAttention(std::string name, Index dim, Index query_rows, Rng& init);

  std::string_view kind() const override { return "cross_attention"; }
  std::vector<Param*> params() override { return {&wq_, &wk_, &wv_}; }

  Index dim() const { return wq_.value.rows(); }
  Index query_rows() const { return query_rows_; }

  static Mat pack(const Mat& q_seq, const Mat& kv_seq);

  // Typed entry points used by the model; forward()/backward() on the packed
  // matrix delegate to these.
  Mat attend(const Mat& q_seq, const Mat& kv_seq);
  // Returns gradients w.r.t. (q_seq, kv_seq).
  std::pair<Mat, Mat> attend_backward(const Mat& grad_out);

  // Row-stochastic attention matrix of the last attend call.
  const Mat& last_weights() const { return attn_; }

 protected:
  Mat forward_impl(const Mat& x) override;
  Mat backward_impl(const Mat& grad_out) override;

 private:
  Param wq_;
  Param wk_;
  Param wv_;
  Index query_rows_;

  Mat q_seq_, kv_seq_;  // cached inputs
  Mat q_, k_, v_;       // projected
  Mat attn_;            // softmax weights
};

}  // namespace agfn
