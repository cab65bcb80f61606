#include "agfn/cli.hpp"
#include "agfn/config.hpp"
#include "agfn/gradcheck_suite.hpp"
#include "agfn/metrics.hpp"
#include "agfn/train.hpp"

#include "test_oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace agfn;

namespace {

std::string tmpdir() {
  static int counter = 0;
  std::string dir = "/tmp/agfn_cli_" + std::to_string(++counter);
  std::remove(dir.c_str());
  REQUIRE(std::system(("mkdir -p " + dir).c_str()) == 0);
  return dir + "/";
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out);
  out << text;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Exact binomial quantiles through the log-pmf; the oracle for the generator's
// event-count calibration.
std::pair<long, long> binomial_99_interval(long n, double p) {
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
  for (long k = 0; k <= n; ++k) {
    const double log_choose =
        std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    pmf[static_cast<std::size_t>(k)] =
        std::exp(log_choose + k * std::log(p) + (n - k) * std::log1p(-p));
  }
  double cum = 0.0;
  long lo = 0, hi = n;
  bool lo_set = false;
  for (long k = 0; k <= n; ++k) {
    cum += pmf[static_cast<std::size_t>(k)];
    if (!lo_set && cum >= 0.005) {
      lo = k;
      lo_set = true;
    }
    if (cum >= 0.995) {
      hi = k;
      break;
    }
  }
  return {lo, hi};
}

}  // namespace

TEST_CASE("config parsing, defaults, and rejection of unknown keys") {
  const std::string dir = tmpdir();
  write_text(dir + "ok.cfg",
             "# comment\n"
             "\n"
             "seed = 2222\n"
             "fusion.tau=0.5\n"
             "train.batch_size=8\n"
             "encoder.use_attention=false\n");
  const ExperimentConfig cfg = parse_config_file(dir + "ok.cfg");
  CHECK(cfg.seed == 2222);
  CHECK(cfg.fusion_tau == 0.5);
  CHECK(cfg.batch_size == 8);
  CHECK(cfg.use_attention == false);
  CHECK(cfg.lr_main == 1e-4);  // untouched default
  validate_config(cfg);

  write_text(dir + "bad_key.cfg", "fusion.temperature=1\n");
  CHECK_THROWS_AS(parse_config_file(dir + "bad_key.cfg"), ConfigError);

  write_text(dir + "bad_value.cfg", "train.batch_size=many\n");
  CHECK_THROWS_AS(parse_config_file(dir + "bad_value.cfg"), ConfigError);

  write_text(dir + "no_equals.cfg", "just a line\n");
  CHECK_THROWS_AS(parse_config_file(dir + "no_equals.cfg"), ConfigError);

  CHECK_THROWS_AS(parse_config_file(dir + "missing.cfg"), ConfigError);

  ExperimentConfig invalid;
  invalid.data_conflict_prob = 1.5;
  CHECK_THROWS_AS(validate_config(invalid), ConfigError);
  invalid = ExperimentConfig{};
  invalid.fusion_tau = -1.0;
  CHECK_THROWS_AS(validate_config(invalid), ConfigError);
  invalid = ExperimentConfig{};
  invalid.patience = 0;
  CHECK_THROWS_AS(validate_config(invalid), ConfigError);
}

TEST_CASE("ablation arms differ in exactly the fusion.mode line") {
  ExperimentConfig a;
  ExperimentConfig b = a;
  b.fusion_mode = "no_gfm";
  CHECK(config_hash(a) != config_hash(b));

  std::istringstream sa(canonical_config(a)), sb(canonical_config(b));
  std::string la, lb;
  int differing = 0;
  while (std::getline(sa, la) && std::getline(sb, lb)) {
    if (la != lb) {
      ++differing;
      CHECK(la.rfind("fusion.mode=", 0) == 0);
    }
  }
  CHECK(differing == 1);

  ExperimentConfig c = a;
  c.seed = 31337;
  CHECK(config_hash(a) != config_hash(c));  // --seed override is hash-visible
}

TEST_CASE("generate: byte-identical reruns and calibrated event counts") {
  const std::string dir = tmpdir();
  write_text(dir + "gen.cfg",
             "seed=1111\ndata.n=1000\ndata.seq_len=1\ndata.conflict_prob=0.3\n"
             "paths.data=" + dir + "a.csv\n");

  CHECK(cli::run({"generate", "--config", dir + "gen.cfg"}) == 0);
  CHECK(cli::run({"generate", "--config", dir + "gen.cfg", "--out", dir + "b.csv"}) == 0);
  CHECK(slurp(dir + "a.csv") == slurp(dir + "b.csv"));

  // the conflict count sits inside the exact binomial 99% interval
  ExperimentConfig cfg = parse_config_file(dir + "gen.cfg");
  const Dataset ds = generate(cfg.synthetic_spec());
  long conflicts = 0;
  for (const ModalityBundle& s : ds.samples)
    if (s.conflict_modality >= 0) ++conflicts;
  const auto [lo, hi] = binomial_99_interval(1000, 0.3);
  CHECK(conflicts >= lo);
  CHECK(conflicts <= hi);

  // and a conflict-free config reports zero events
  write_text(dir + "clean.cfg", "data.n=50\npaths.data=" + dir + "c.csv\n");
  CHECK(cli::run({"generate", "--config", dir + "clean.cfg"}) == 0);
  const Dataset clean = load_csv(dir + "c.csv");
  CHECK(clean.size() == 50);
}

TEST_CASE("train and evaluate: determinism, report keys, split selection") {
  const std::string dir = tmpdir();
  const std::string common =
      "seed=1111\ndata.n=80\ndata.seq_len=2\ndata.d_t=6\ndata.d_a=6\ndata.d_v=6\n"
      "encoder.dim=8\ntrain.max_epochs=4\ntrain.lr_main=0.002\ntrain.batch_size=16\n"
      "paths.data=" + dir + "feats.csv\npaths.model=" + dir + "m.agfn\npaths.report=" + dir + "r.txt\n";
  write_text(dir + "exp.cfg", common);

  REQUIRE(cli::run({"generate", "--config", dir + "exp.cfg"}) == 0);
  REQUIRE(cli::run({"train", "--config", dir + "exp.cfg"}) == 0);
  const std::string model_once = slurp(dir + "m.agfn");
  const std::string report_once = slurp(dir + "r.txt");
  REQUIRE(cli::run({"train", "--config", dir + "exp.cfg"}) == 0);
  CHECK(slurp(dir + "m.agfn") == model_once);
  CHECK(slurp(dir + "r.txt") == report_once);

  REQUIRE(cli::run({"evaluate", "--config", dir + "exp.cfg", "--split", "test",
                    "--out", dir + "eval.txt"}) == 0);
  const std::string report = slurp(dir + "eval.txt");
  std::vector<std::string> keys;
  std::istringstream lines(report);
  std::string line;
  while (std::getline(lines, line)) keys.push_back(line.substr(0, line.find('=')));
  const std::vector<std::string> expected = {"acc2", "f1",   "acc7",       "mae",
                                             "mae_x100", "seed", "config_hash"};
  CHECK(keys == expected);

  // the recorded hash is the effective config's hash
  ExperimentConfig cfg = parse_config_file(dir + "exp.cfg");
  CHECK(report.find("config_hash=" + config_hash(cfg)) != std::string::npos);

  // split selection changes the numbers (different subsets)
  REQUIRE(cli::run({"evaluate", "--config", dir + "exp.cfg", "--split", "val",
                    "--out", dir + "eval_val.txt"}) == 0);
  CHECK(slurp(dir + "eval_val.txt") != report);
}

TEST_CASE("a memorized tiny set evaluates to perfect binary accuracy") {
  const std::string dir = tmpdir();
  SyntheticSpec spec;
  spec.n = 8;
  spec.seq_len = 1;
  spec.d_text = spec.d_audio = spec.d_visual = 4;
  spec.noise_std = {0.0, 0.0, 0.0};
  spec.seed = 5;
  Dataset ds = generate(spec);
  save_csv(ds, dir + "tiny.csv");

  ModelConfig mc;
  mc.d_text = mc.d_audio = mc.d_visual = 4;
  mc.dim = 8;
  mc.seq_len = 1;
  mc.use_attention = false;
  mc.head_hidden = 8;
  Rng init(5);
  AgfnModel model(mc, init);

  TrainConfig tc;
  tc.seed = 5;
  tc.max_epochs = 400;
  tc.patience = 400;
  tc.lr_main = 0.01;
  tc.batch_size = 8;
  tc.vat_lambda = 0.0;
  train(model, ds, ds, tc);
  save_model(model, "testhash000000000", dir + "tiny.agfn");

  write_text(dir + "tiny.cfg", "paths.data=" + dir + "tiny.csv\npaths.model=" + dir +
                                   "tiny.agfn\npaths.report=" + dir + "tiny_report.txt\n");
  REQUIRE(cli::run({"evaluate", "--config", dir + "tiny.cfg", "--split", "all"}) == 0);
  CHECK(slurp(dir + "tiny_report.txt").find("acc2=1.000000") != std::string::npos);
}

TEST_CASE("analyze: constant errors give psc zero and a full embedding") {
  const std::string dir = tmpdir();
  SyntheticSpec spec;
  spec.n = 60;
  spec.seq_len = 1;
  spec.d_text = spec.d_audio = spec.d_visual = 4;
  spec.seed = 6;
  Dataset ds = generate(spec);
  for (ModalityBundle& b : ds.samples) b.label = 0.0;  // constant target
  save_csv(ds, dir + "flat.csv");

  ModelConfig mc;
  mc.d_text = mc.d_audio = mc.d_visual = 4;
  mc.dim = 6;
  mc.seq_len = 1;
  mc.use_attention = false;
  Rng init(6);
  AgfnModel model(mc, init);
  for (Param* p : model.params())
    if (p->name.rfind("head.2", 0) == 0) p->value.setZero();  // predict exactly 0
  save_model(model, "testhash000000000", dir + "flat.agfn");

  write_text(dir + "an.cfg", "paths.data=" + dir + "flat.csv\npaths.model=" + dir +
                                 "flat.agfn\npaths.embedding=" + dir + "emb.csv\n");
  REQUIRE(cli::run({"analyze", "--config", dir + "an.cfg"}) == 0);

  const std::string emb = slurp(dir + "emb.csv");
  CHECK(emb.rfind("# config_hash=", 0) == 0);
  std::istringstream lines(emb);
  std::string line;
  std::getline(lines, line);  // hash comment
  std::getline(lines, line);
  CHECK(line == "sample_id,x,y,error,high_error");
  Index rows = 0;
  Index flagged = 0;
  Vec errors(60);
  Mat coords(60, 2);
  while (std::getline(lines, line)) {
    std::istringstream fields(line);
    std::string id, x, y, err, flag;
    std::getline(fields, id, ',');
    std::getline(fields, x, ',');
    std::getline(fields, y, ',');
    std::getline(fields, err, ',');
    std::getline(fields, flag, ',');
    coords(rows, 0) = std::stod(x);
    coords(rows, 1) = std::stod(y);
    errors(rows) = std::stod(err);
    flagged += flag == "1" ? 1 : 0;
    ++rows;
  }
  CHECK(rows == 60);  // one embedding row per sample
  CHECK(flagged == 6);
  CHECK(errors.cwiseAbs().maxCoeff() == 0.0);
  CHECK(psc(coords, errors) == 0.0);
}

TEST_CASE("exit codes separate config, data, and numerical failures") {
  const std::string dir = tmpdir();
  write_text(dir + "bad.cfg", "no.such.key=1\n");
  CHECK(cli::run({"train", "--config", dir + "bad.cfg"}) == 1);

  write_text(dir + "nodata.cfg", "paths.data=" + dir + "absent.csv\n");
  CHECK(cli::run({"train", "--config", dir + "nodata.cfg"}) == 2);

  CHECK(cli::run({"grad-check", "--instances", "2", "--inject-fault"}) == 3);
  CHECK(cli::run({"nonsense"}) == 1);

  // dimension mismatch between model and data is a data error
  SyntheticSpec spec;
  spec.n = 12;
  spec.seq_len = 1;
  spec.d_text = spec.d_audio = spec.d_visual = 4;
  spec.seed = 9;
  save_csv(generate(spec), dir + "d4.csv");
  ModelConfig mc;
  mc.d_text = mc.d_audio = mc.d_visual = 5;
  mc.dim = 4;
  mc.seq_len = 1;
  mc.use_attention = false;
  Rng init(9);
  AgfnModel model(mc, init);
  save_model(model, "testhash000000000", dir + "d5.agfn");
  write_text(dir + "mismatch.cfg",
             "paths.data=" + dir + "d4.csv\npaths.model=" + dir + "d5.agfn\npaths.report=" + dir +
                 "mm.txt\n");
  CHECK(cli::run({"evaluate", "--config", dir + "mismatch.cfg"}) == 2);
}

TEST_CASE("grad-check suite covers every layer kind exactly once") {
  const auto results = run_grad_check_suite(2, 123);
  std::vector<std::string> kinds;
  for (const auto& r : results) kinds.push_back(r.kind);
  const std::vector<std::string> expected = {
      "affine",        "tanh",          "mean_pool",     "encoder",
      "cross_attention", "entropy_gate", "importance_gate", "adaptive_fuse",
      "concat_project", "prediction_head", "agfn_model"};
  CHECK(kinds == expected);
  CHECK(std::set<std::string>(kinds.begin(), kinds.end()).size() == kinds.size());
  for (const auto& r : results) CHECK(r.max_rel_error <= kGradCheckTolerance);
}

TEST_CASE("ablate: one seed yields four arm rows plus matching medians") {
  const std::string dir = tmpdir();
  write_text(dir + "ab.cfg",
             "seed=1111\ndata.n=40\ndata.seq_len=1\ndata.d_t=4\ndata.d_a=4\ndata.d_v=4\n"
             "encoder.dim=6\ntrain.max_epochs=2\ntrain.batch_size=10\n"
             "paths.data=" + dir + "ab.csv\n");
  REQUIRE(cli::run({"generate", "--config", dir + "ab.cfg"}) == 0);
  REQUIRE(cli::run({"ablate", "--config", dir + "ab.cfg", "--out", dir + "t1.csv"}) == 0);
  REQUIRE(cli::run({"ablate", "--config", dir + "ab.cfg", "--out", dir + "t2.csv"}) == 0);
  CHECK(slurp(dir + "t1.csv") == slurp(dir + "t2.csv"));

  std::istringstream lines(slurp(dir + "t1.csv"));
  std::string line;
  std::getline(lines, line);
  CHECK(line.rfind("# agfn-ablation config_hash=", 0) == 0);
  std::getline(lines, line);
  CHECK(line == "mode,seed,acc2,f1,acc7,mae");

  std::map<std::string, std::vector<std::string>> by_mode;
  while (std::getline(lines, line)) {
    const auto comma = line.find(',');
    by_mode[line.substr(0, comma)].push_back(line.substr(comma + 1));
  }
  CHECK(by_mode.size() == 4);
  for (const char* mode : {"full", "ieg_only", "mig_only", "no_gfm"}) {
    REQUIRE(by_mode.count(mode) == 1);
    const auto& rows = by_mode[mode];
    REQUIRE(rows.size() == 2);  // one seed row + one median row
    CHECK(rows[0].rfind("1111,", 0) == 0);
    CHECK(rows[1].rfind("median,", 0) == 0);
    // with a single seed the median equals the row
    CHECK(rows[0].substr(rows[0].find(',')) == rows[1].substr(rows[1].find(',')));
  }
}

TEST_CASE("model files round trip through save and load") {
  const std::string dir = tmpdir();
  SyntheticSpec spec;
  spec.n = 15;
  spec.seq_len = 2;
  spec.d_text = spec.d_audio = spec.d_visual = 4;
  spec.seed = 12;
  const Dataset ds = generate(spec);

  ModelConfig mc;
  mc.d_text = mc.d_audio = mc.d_visual = 4;
  mc.dim = 5;
  mc.seq_len = 2;
  mc.use_attention = true;
  mc.fusion_mode = FusionMode::Full;
  mc.tau = 0.7;
  Rng init(12);
  AgfnModel model(mc, init);
  save_model(model, "cafebabe12345678", dir + "rt.agfn");

  LoadedModel loaded = load_model(dir + "rt.agfn");
  CHECK(loaded.config_hash == "cafebabe12345678");
  CHECK(loaded.config.use_attention == true);
  CHECK(loaded.config.dim == 5);
  for (Index i = 0; i < ds.size(); ++i) {
    const double a = model.forward(ds.samples[static_cast<std::size_t>(i)]).prediction;
    const double b = loaded.model->forward(ds.samples[static_cast<std::size_t>(i)]).prediction;
    CHECK(a == b);
  }

  write_text(dir + "junk.agfn", "not a model\n");
  CHECK_THROWS_AS(load_model(dir + "junk.agfn"), DataError);
  CHECK_THROWS_AS(load_model(dir + "missing.agfn"), DataError);
}
