#include "agfn/cli.hpp"

#include "agfn/config.hpp"
#include "agfn/gradcheck_suite.hpp"
#include "agfn/metrics.hpp"
#include "agfn/train.hpp"
#include "agfn/tsne.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace agfn::cli {

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file (key=value lines)");
  cmd->add_option("--out", args.out_path, "primary output path (overrides the config)");
  cmd->add_option("--seed", args.seed, "seed override")->each([&args](const std::string&) {
    args.seed_set = true;
  });
}

ExperimentConfig effective_config(const CommonArgs& args) {
  ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg = parse_config_file(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  validate_config(cfg);
  return cfg;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError("write to '" + path + "' failed");
}

Dataset select_split(const Dataset& ds, const std::string& which, std::uint64_t seed) {
  if (which == "all") return ds;
  const SplitView sv = split(ds, seed);
  if (which == "train") return subset(ds, sv.train);
  if (which == "val") return subset(ds, sv.val);
  if (which == "test") return subset(ds, sv.test);
  throw ConfigError("unknown split '" + which + "' (expected all|train|val|test)");
}

int cmd_generate(const CommonArgs& args) {
  const ExperimentConfig cfg = effective_config(args);
  const std::string hash = config_hash(cfg);
  const Dataset ds = generate(cfg.synthetic_spec());

  Index conflicts = 0, missing = 0;
  for (const ModalityBundle& b : ds.samples) {
    if (b.conflict_modality >= 0) ++conflicts;
    if (b.missing_modality >= 0) ++missing;
  }

  const std::string out = args.out_path.empty() ? cfg.path_data : args.out_path;
  save_csv(ds, out);
  std::printf("samples=%lld\nconflict_events=%lld\nmissing_events=%lld\nconfig_hash=%s\nfile=%s\n",
              static_cast<long long>(ds.size()), static_cast<long long>(conflicts),
              static_cast<long long>(missing), hash.c_str(), out.c_str());
  return 0;
}

int cmd_train(const CommonArgs& args) {
  const ExperimentConfig cfg = effective_config(args);
  const std::string hash = config_hash(cfg);

  const Dataset ds = load_csv(cfg.path_data);
  const SplitView sv = split(ds, cfg.seed);
  const Dataset train_set = subset(ds, sv.train);
  const Dataset val_set = subset(ds, sv.val);

  Rng init(cfg.seed);
  AgfnModel model(cfg.model_config(ds.d_text, ds.d_audio, ds.d_visual, ds.seq_len), init);
  const TrainResult result = train(model, train_set, val_set, cfg.train_config());

  const std::string model_out = args.out_path.empty() ? cfg.path_model : args.out_path;
  save_model(model, hash, model_out);

  Vec val_pred = predict_all(model, val_set);
  MetricsReport report = compute_metrics(val_pred, labels_of(val_set), cfg.seed, hash);
  write_file(cfg.path_report, format_report(report));

  std::printf("epochs=%zu\nbest_epoch=%lld\nbest_val_mae=%.6f\nmodel=%s\nreport=%s\n",
              result.history.size(), static_cast<long long>(result.best_epoch), result.best_val_mae,
              model_out.c_str(), cfg.path_report.c_str());
  return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::string& model_arg, const std::string& data_arg,
                 const std::string& split_sel) {
  const ExperimentConfig cfg = effective_config(args);
  const std::string hash = config_hash(cfg);

  LoadedModel lm = load_model(model_arg.empty() ? cfg.path_model : model_arg);
  const Dataset full = load_csv(data_arg.empty() ? cfg.path_data : data_arg);
  const Dataset ds = select_split(full, split_sel, cfg.seed);
  if (ds.samples.empty()) throw DataError("evaluate: selected split is empty");

  const Vec pred = predict_all(*lm.model, ds);
  const MetricsReport report = compute_metrics(pred, labels_of(ds), cfg.seed, hash);
  const std::string block = format_report(report);

  const std::string out = args.out_path.empty() ? cfg.path_report : args.out_path;
  write_file(out, block);
  std::fputs(block.c_str(), stdout);
  return 0;
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

int cmd_ablate(const CommonArgs& args, std::vector<std::uint64_t> seeds) {
  const ExperimentConfig base = effective_config(args);
  if (seeds.empty()) seeds.push_back(base.seed);

  const Dataset ds = load_csv(base.path_data);

  const FusionMode modes[] = {FusionMode::Full, FusionMode::IegOnly, FusionMode::MigOnly,
                              FusionMode::NoGfm};
  struct Row {
    std::uint64_t seed;
    MetricsReport metrics;
  };
  std::vector<std::vector<Row>> rows(4);

  for (const std::uint64_t seed : seeds) {
    const SplitView sv = split(ds, seed);
    const Dataset train_set = subset(ds, sv.train);
    const Dataset val_set = subset(ds, sv.val);
    const Dataset test_set = subset(ds, sv.test);

    for (std::size_t mi = 0; mi < 4; ++mi) {
      ExperimentConfig arm = base;
      arm.fusion_mode = to_string(modes[mi]);
      arm.seed = seed;
      const std::string arm_hash = config_hash(arm);

      Rng init(seed);
      AgfnModel model(arm.model_config(ds.d_text, ds.d_audio, ds.d_visual, ds.seq_len), init);
      train(model, train_set, val_set, arm.train_config());

      const Vec pred = predict_all(model, test_set);
      rows[mi].push_back({seed, compute_metrics(pred, labels_of(test_set), seed, arm_hash)});
    }
  }

  std::string csv = "# agfn-ablation config_hash=" + config_hash(base) + "\n";
  csv += "mode,seed,acc2,f1,acc7,mae\n";
  char buf[160];
  for (std::size_t mi = 0; mi < 4; ++mi) {
    std::vector<double> a2, f1, a7, me;
    for (const Row& r : rows[mi]) {
      std::snprintf(buf, sizeof(buf), "%s,%llu,%.6f,%.6f,%.6f,%.6f\n", to_string(modes[mi]).c_str(),
                    static_cast<unsigned long long>(r.seed), r.metrics.acc2, r.metrics.f1,
                    r.metrics.acc7, r.metrics.mae);
      csv += buf;
      a2.push_back(r.metrics.acc2);
      f1.push_back(r.metrics.f1);
      a7.push_back(r.metrics.acc7);
      me.push_back(r.metrics.mae);
    }
    std::snprintf(buf, sizeof(buf), "%s,median,%.6f,%.6f,%.6f,%.6f\n", to_string(modes[mi]).c_str(),
                  median_of(a2), median_of(f1), median_of(a7), median_of(me));
    csv += buf;
  }

  const std::string out = args.out_path.empty() ? "ablation.csv" : args.out_path;
  write_file(out, csv);
  std::fputs(csv.c_str(), stdout);
  return 0;
}

int cmd_analyze(const CommonArgs& args, const std::string& model_arg, const std::string& data_arg,
                const std::string& split_sel) {
  const ExperimentConfig cfg = effective_config(args);
  const std::string hash = config_hash(cfg);

  LoadedModel lm = load_model(model_arg.empty() ? cfg.path_model : model_arg);
  const Dataset full = load_csv(data_arg.empty() ? cfg.path_data : data_arg);
  const Dataset ds = select_split(full, split_sel, cfg.seed);
  if (ds.samples.empty()) throw DataError("analyze: selected split is empty");

  Mat fused;
  Vec errors;
  collect_fused(*lm.model, ds, fused, errors);

  const Embedding2D emb = tsne(fused);
  const double psc_value = psc(emb.coords, errors);
  const std::vector<bool> mask = high_error_mask(errors, 0.10);

  std::string csv = "# config_hash=" + hash + "\n";
  csv += "sample_id,x,y,error,high_error\n";
  char buf[160];
  for (Index i = 0; i < ds.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%s,%.12g,%.12g,%.12g,%d\n",
                  ds.samples[static_cast<std::size_t>(i)].sample_id.c_str(), emb.coords(i, 0),
                  emb.coords(i, 1), errors(i), mask[static_cast<std::size_t>(i)] ? 1 : 0);
    csv += buf;
  }

  const std::string out = args.out_path.empty() ? cfg.path_embedding : args.out_path;
  write_file(out, csv);
  std::printf("psc=%.6f\nembedding=%s\nrows=%lld\n", psc_value, out.c_str(),
              static_cast<long long>(ds.size()));
  return 0;
}

int cmd_grad_check(const CommonArgs& args, Index instances, bool inject_fault) {
  const ExperimentConfig cfg = effective_config(args);
  const auto results = run_grad_check_suite(instances, cfg.seed, inject_fault);

  bool failed = false;
  for (const LayerCheckResult& r : results) {
    const bool ok = r.max_rel_error <= kGradCheckTolerance;
    failed = failed || !ok;
    std::printf("%-18s instances=%lld max_rel_error=%.3e %s\n", r.kind.c_str(),
                static_cast<long long>(r.instances), r.max_rel_error, ok ? "ok" : "FAIL");
  }
  if (failed) {
    std::printf("grad-check: FAILED (tolerance %.1e)\n", kGradCheckTolerance);
    return 3;
  }
  std::printf("grad-check: all layers within %.1e\n", kGradCheckTolerance);
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Adaptive gated fusion network for multimodal regression"};
  app.require_subcommand(1);

  CommonArgs generate_args, train_args, evaluate_args, ablate_args, analyze_args, check_args;
  std::string evaluate_model, evaluate_data, evaluate_split = "all";
  std::string analyze_model, analyze_data, analyze_split = "all";
  std::vector<std::uint64_t> ablate_seeds;
  Index check_instances = 100;
  bool check_fault = false;

  CLI::App* generate = app.add_subcommand("generate", "write a synthetic feature file");
  add_common(generate, generate_args);

  CLI::App* train = app.add_subcommand("train", "train a model and report validation metrics");
  add_common(train, train_args);

  CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a saved model on a feature file");
  add_common(evaluate, evaluate_args);
  evaluate->add_option("--model", evaluate_model, "model file (default: paths.model)");
  evaluate->add_option("--data", evaluate_data, "feature file (default: paths.data)");
  evaluate->add_option("--split", evaluate_split, "all|train|val|test (seeded split)");

  CLI::App* ablate = app.add_subcommand("ablate", "train and compare all fusion variants");
  add_common(ablate, ablate_args);
  ablate->add_option("--seeds", ablate_seeds, "seeds to sweep")->delimiter(',');

  CLI::App* analyze = app.add_subcommand("analyze", "embed fused features and report PSC");
  add_common(analyze, analyze_args);
  analyze->add_option("--model", analyze_model, "model file (default: paths.model)");
  analyze->add_option("--data", analyze_data, "feature file (default: paths.data)");
  analyze->add_option("--split", analyze_split, "all|train|val|test (seeded split)");

  CLI::App* check = app.add_subcommand("grad-check", "finite-difference audit of every layer type");
  add_common(check, check_args);
  check->add_option("--instances", check_instances, "random instances per layer type");
  check->add_flag("--inject-fault", check_fault, "corrupt one gradient to exercise the detector");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (generate->parsed()) return cmd_generate(generate_args);
    if (train->parsed()) return cmd_train(train_args);
    if (evaluate->parsed()) return cmd_evaluate(evaluate_args, evaluate_model, evaluate_data, evaluate_split);
    if (ablate->parsed()) return cmd_ablate(ablate_args, ablate_seeds);
    if (analyze->parsed()) return cmd_analyze(analyze_args, analyze_model, analyze_data, analyze_split);
    if (check->parsed()) return cmd_grad_check(check_args, check_instances, check_fault);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 1;
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> with_program = args;
  with_program.insert(with_program.begin(), "agfn");
  std::vector<const char*> argv;
  argv.reserve(with_program.size());
  for (const std::string& a : with_program) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace agfn::cli
