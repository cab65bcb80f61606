#include "agfn/encoders.hpp"
#include "agfn/model.hpp"

#include "test_oracles.hpp"

#include <doctest.h>

#include <map>

using namespace agfn;

namespace {

std::map<std::string, Mat> param_map(AgfnModel& model) {
  std::map<std::string, Mat> by_name;
  for (Param* p : model.params()) by_name[p->name] = p->value;
  return by_name;
}

}  // namespace

TEST_CASE("encode: single row with identity projection is tanh(row)") {
  Rng rng(21);
  Encoder enc("e", 3, 3, rng);
  for (Param* p : enc.params()) {
    if (p->name == "e.W") p->value = Mat::Identity(3, 3);
    if (p->name == "e.b") p->value.setZero();
  }
  const Mat row = rng.gaussian_matrix(1, 3);
  CHECK((enc.forward(row) - row.array().tanh().matrix()).cwiseAbs().maxCoeff() < 1e-15);

  // constant sequence pools to the same row
  Mat repeated(4, 3);
  for (int r = 0; r < 4; ++r) repeated.row(r) = row.row(0);
  CHECK((enc.forward(repeated) - enc.forward(row)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("encode matches pool->affine->tanh oracle and is row-permutation invariant") {
  Rng rng(22);
  Encoder enc("e", 5, 4, rng);
  Mat w, b;
  for (Param* p : enc.params()) {
    if (p->name == "e.W") w = p->value;
    if (p->name == "e.b") b = p->value;
  }
  const Mat seq = rng.gaussian_matrix(6, 5);
  const Vec expected = oracle::encode_direct(w, b.col(0), seq);
  CHECK((enc.forward(seq).row(0).transpose() - expected).cwiseAbs().maxCoeff() < 1e-12);

  Mat permuted(6, 5);
  const int order[6] = {3, 0, 5, 1, 4, 2};
  for (int r = 0; r < 6; ++r) permuted.row(r) = seq.row(order[r]);
  CHECK((enc.forward(permuted).row(0).transpose() - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cross attention: singleton key, zero projections, oracle") {
  Rng rng(23);
  const Index d = 4;
  CrossAttention attn("a", d, 3, rng);

  Mat wq, wk, wv;
  for (Param* p : attn.params()) {
    if (p->name == "a.Wq") wq = p->value;
    if (p->name == "a.Wk") wk = p->value;
    if (p->name == "a.Wv") wv = p->value;
  }

  const Mat q = rng.gaussian_matrix(3, d);
  const Mat kv1 = rng.gaussian_matrix(1, d);
  const Mat out1 = attn.attend(q, kv1);
  CHECK((attn.last_weights() - Mat::Ones(3, 1)).cwiseAbs().maxCoeff() == 0.0);
  const Mat vproj = kv1 * wv.transpose();
  for (int i = 0; i < 3; ++i)
    CHECK((out1.row(i) - (q.row(i) + vproj.row(0))).cwiseAbs().maxCoeff() < 1e-12);

  for (Param* p : attn.params()) p->value.setZero();
  const Mat kv = rng.gaussian_matrix(2, d);
  CHECK((attn.attend(q, kv) - q).cwiseAbs().maxCoeff() == 0.0);

  for (Param* p : attn.params()) p->value = rng.uniform_matrix(d, d, -0.7, 0.7);
  for (Param* p : attn.params()) {
    if (p->name == "a.Wq") wq = p->value;
    if (p->name == "a.Wk") wk = p->value;
    if (p->name == "a.Wv") wv = p->value;
  }
  const Mat out = attn.attend(q, kv);
  CHECK((out - oracle::attention_direct(wq, wk, wv, q, kv)).cwiseAbs().maxCoeff() < 1e-12);

  // weight rows are distributions
  for (int i = 0; i < attn.last_weights().rows(); ++i) {
    CHECK(std::abs(attn.last_weights().row(i).sum() - 1.0) <= 1e-12);
    CHECK(attn.last_weights().row(i).minCoeff() >= 0.0);
  }
}

TEST_CASE("encode_bundle without attention equals per-modality encoding") {
  Rng init(24);
  ModelConfig cfg;
  cfg.d_text = 3;
  cfg.d_audio = 4;
  cfg.d_visual = 5;
  cfg.dim = 6;
  cfg.seq_len = 2;
  cfg.use_attention = false;
  AgfnModel model(cfg, init);
  auto params = param_map(model);

  Rng rng(25);
  ModalityBundle b;
  b.text = rng.gaussian_matrix(2, 3);
  b.audio = rng.gaussian_matrix(2, 4);
  b.visual = rng.gaussian_matrix(2, 5);

  const auto fw = model.forward(b);
  CHECK((fw.encoded.text - oracle::encode_direct(params["enc_t.W"], params["enc_t.b"].col(0), b.text))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK((fw.encoded.audio - oracle::encode_direct(params["enc_a.W"], params["enc_a.b"].col(0), b.audio))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK((fw.encoded.visual -
         oracle::encode_direct(params["enc_v.W"], params["enc_v.b"].col(0), b.visual))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("encode_bundle with zero attention projections reduces to plain encoding") {
  Rng init(26);
  ModelConfig cfg;
  cfg.d_text = cfg.d_audio = cfg.d_visual = 4;
  cfg.dim = 5;
  cfg.seq_len = 3;
  cfg.use_attention = true;
  AgfnModel model(cfg, init);
  for (Param* p : model.params())
    if (p->name.rfind("attn_", 0) == 0) p->value.setZero();
  auto params = param_map(model);

  Rng rng(27);
  ModalityBundle b;
  b.text = rng.gaussian_matrix(3, 4);
  b.audio = rng.gaussian_matrix(3, 4);
  b.visual = rng.gaussian_matrix(3, 4);

  const auto fw = model.forward(b);
  CHECK((fw.encoded.text - oracle::encode_direct(params["enc_t.W"], params["enc_t.b"].col(0), b.text))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK((fw.encoded.audio - oracle::encode_direct(params["enc_a.W"], params["enc_a.b"].col(0), b.audio))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("encode_bundle with attention matches the step-by-step pipeline oracle") {
  Rng init(28);
  ModelConfig cfg;
  cfg.d_text = cfg.d_audio = cfg.d_visual = 4;
  cfg.dim = 5;
  cfg.seq_len = 2;
  cfg.use_attention = true;
  AgfnModel model(cfg, init);
  auto params = param_map(model);

  Rng rng(29);
  ModalityBundle b;
  b.text = rng.gaussian_matrix(2, 4);
  b.audio = rng.gaussian_matrix(2, 4);
  b.visual = rng.gaussian_matrix(2, 4);

  auto stack = [](const Mat& a, const Mat& c) {
    Mat out(a.rows() + c.rows(), a.cols());
    out.topRows(a.rows()) = a;
    out.bottomRows(c.rows()) = c;
    return out;
  };
  // all three refinements read the unrefined inputs
  const Mat t_ref = oracle::attention_direct(params["attn_t.Wq"], params["attn_t.Wk"],
                                             params["attn_t.Wv"], b.text, stack(b.audio, b.visual));
  const Mat a_ref = oracle::attention_direct(params["attn_a.Wq"], params["attn_a.Wk"],
                                             params["attn_a.Wv"], b.audio, stack(b.text, b.visual));
  const Mat v_ref = oracle::attention_direct(params["attn_v.Wq"], params["attn_v.Wk"],
                                             params["attn_v.Wv"], b.visual, stack(b.text, b.audio));

  const auto fw = model.forward(b);
  CHECK((fw.encoded.text - oracle::encode_direct(params["enc_t.W"], params["enc_t.b"].col(0), t_ref))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK((fw.encoded.audio - oracle::encode_direct(params["enc_a.W"], params["enc_a.b"].col(0), a_ref))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK((fw.encoded.visual -
         oracle::encode_direct(params["enc_v.W"], params["enc_v.b"].col(0), v_ref))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("attention requires equal modality dims") {
  Rng init(30);
  ModelConfig cfg;
  cfg.d_text = 3;
  cfg.d_audio = 4;
  cfg.d_visual = 4;
  cfg.use_attention = true;
  CHECK_THROWS_AS(AgfnModel(cfg, init), ConfigError);
}
