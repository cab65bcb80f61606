#include "agfn/train.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace agfn {

double l1_loss(const Vec& pred, const Vec& target) {
  if (pred.size() != target.size()) throw std::domain_error("l1_loss: length mismatch");
  if (pred.size() == 0) throw std::domain_error("l1_loss: empty input");
  return (pred - target).cwiseAbs().mean();
}

double cosine_lr(Index step, Index total_steps, double lr_main, double lr_final) {
  if (total_steps < 1) throw std::domain_error("cosine_lr: total_steps must be >= 1");
  if (step < 0 || step > total_steps) throw std::domain_error("cosine_lr: step out of range");
  const double phase = M_PI * static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_final + 0.5 * (lr_main - lr_final) * (1.0 + std::cos(phase));
}

AdamW::AdamW(std::vector<Param*> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Param* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamW::step(double lr, double weight_decay) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    p.value *= (1.0 - lr * weight_decay);
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
  }
}

Vec vat_perturbation(ScalarField& f, const Vec& h, const VatConfig& cfg, Rng& rng) {
  if (cfg.steps < 1) throw std::domain_error("vat_perturbation: steps must be >= 1");
  if (cfg.epsilon <= 0.0 || cfg.xi <= 0.0)
    throw std::domain_error("vat_perturbation: epsilon and xi must be positive");

  Vec d(h.size());
  double norm = 0.0;
  do {
    for (Index i = 0; i < d.size(); ++i) d(i) = rng.gaussian();
    norm = d.norm();
  } while (norm == 0.0);
  d /= norm;

  const double clean = f.value(h);
  for (Index k = 0; k < cfg.steps; ++k) {
    const Vec probe = h + cfg.xi * d;
    const double shifted = f.value(probe);
    // grad_d of (f(h + xi d) - f(h))^2 with f(h) fixed.
    Vec g = f.vjp(probe, 2.0 * (shifted - clean) * cfg.xi, /*accumulate_param_grads=*/false);
    const double gnorm = g.norm();
    if (!(gnorm > 0.0) || !std::isfinite(gnorm)) break;
    d = g / gnorm;
  }
  return cfg.epsilon * d;
}

BatchLoss batch_loss(AgfnModel& model, const Dataset& data, const std::vector<Index>& batch,
                     const TrainConfig& cfg, Rng& rng, bool with_grads, bool force_vat_code_path) {
  if (batch.empty()) throw std::domain_error("batch_loss: empty batch");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const bool vat_on = force_vat_code_path || cfg.vat_lambda != 0.0;
  const VatConfig vat{cfg.vat_epsilon, cfg.vat_xi, cfg.vat_steps};

  BatchLoss out;
  for (Index idx : batch) {
    const ModalityBundle& sample = data.samples[static_cast<std::size_t>(idx)];
    const auto fw = model.forward(sample);
    const double err = fw.prediction - sample.label;
    out.l1 += std::abs(err) * inv_n;
    double d_pred = 0.0;
    if (with_grads) d_pred = (err > 0.0 ? 1.0 : (err < 0.0 ? -1.0 : 0.0)) * inv_n;

    if (vat_on) {
      const Vec r_adv = vat_perturbation(model.head(), fw.fused, vat, rng);
      const Vec probe = fw.fused + r_adv;
      const double shifted = model.head().value(probe);
      const double diff = shifted - fw.prediction;
      out.consistency += diff * diff * inv_n;
      if (with_grads) {
        const double d_shifted = cfg.vat_lambda * 2.0 * diff * inv_n;
        const Vec extra = model.head().vjp(probe, d_shifted, /*accumulate_param_grads=*/true);
        d_pred += cfg.vat_lambda * (-2.0) * diff * inv_n;
        model.backward(d_pred, extra);
      }
    } else if (with_grads) {
      model.backward(d_pred);
    }
  }
  out.total = out.l1 + cfg.vat_lambda * out.consistency;
  return out;
}

namespace {

std::vector<Mat> snapshot_params(const std::vector<Param*>& params) {
  std::vector<Mat> values;
  values.reserve(params.size());
  for (const Param* p : params) values.push_back(p->value);
  return values;
}

void restore_params(const std::vector<Param*>& params, const std::vector<Mat>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace

TrainResult train(AgfnModel& model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  if (train_set.samples.empty() || val_set.samples.empty())
    throw DataError("train: empty train or validation split");
  if (cfg.batch_size < 1 || cfg.patience < 1 || cfg.max_epochs < 1)
    throw ConfigError("train: batch_size, patience and max_epochs must be >= 1");

  Rng rng(cfg.seed);
  const Index n = train_set.size();
  const Index batches_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const Index total_steps = cfg.max_epochs * batches_per_epoch;

  AdamW optimizer(model.trainable_params(), 0.9, 0.999, 1e-8);
  const auto all_params = model.params();
  const Vec val_labels = labels_of(val_set);

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  TrainResult result;
  result.best_val_mae = std::numeric_limits<double>::infinity();
  std::vector<Mat> best_values = snapshot_params(all_params);
  Index epochs_without_improvement = 0;
  Index global_step = 0;

  for (Index epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    double last_lr = 0.0;

    for (Index b = 0; b < batches_per_epoch; ++b) {
      const auto begin = order.begin() + b * cfg.batch_size;
      const auto end = order.begin() + std::min<Index>((b + 1) * cfg.batch_size, n);
      const std::vector<Index> batch(begin, end);

      model.zero_grads();
      const BatchLoss loss =
          batch_loss(model, train_set, batch, cfg, rng, /*with_grads=*/true, hooks.force_vat_code_path);
      if (!std::isfinite(loss.total)) {
        std::ostringstream msg;
        msg << "train: non-finite loss at epoch " << epoch << " step " << global_step
            << " (diverged); lower the learning rate or raise clip_norm";
        throw NumericError(msg.str());
      }
      epoch_loss += loss.total * static_cast<double>(batch.size()) / static_cast<double>(n);

      std::vector<Mat*> grads;
      grads.reserve(all_params.size());
      for (Param* p : model.trainable_params()) grads.push_back(&p->grad);
      global_norm_clip(grads, cfg.clip_norm);

      last_lr = cosine_lr(global_step, total_steps, cfg.lr_main, cfg.lr_final);
      optimizer.step(last_lr, cfg.weight_decay);
      ++global_step;
    }

    const Vec val_pred = predict_all(model, val_set);
    const double val_mae = l1_loss(val_pred, val_labels);
    result.history.push_back({epoch, epoch_loss, val_mae, last_lr});

    if (val_mae < result.best_val_mae) {
      result.best_val_mae = val_mae;
      result.best_epoch = epoch;
      best_values = snapshot_params(all_params);
      epochs_without_improvement = 0;
    } else {
      ++epochs_without_improvement;
      if (epochs_without_improvement >= cfg.patience) break;
    }
  }

  restore_params(all_params, best_values);
  result.steps_taken = global_step;
  return result;
}

Vec predict_all(AgfnModel& model, const Dataset& ds) {
  Vec pred(ds.size());
  for (Index i = 0; i < ds.size(); ++i)
    pred(i) = model.forward(ds.samples[static_cast<std::size_t>(i)]).prediction;
  return pred;
}

Vec labels_of(const Dataset& ds) {
  Vec y(ds.size());
  for (Index i = 0; i < ds.size(); ++i) y(i) = ds.samples[static_cast<std::size_t>(i)].label;
  return y;
}

void collect_fused(AgfnModel& model, const Dataset& ds, Mat& fused, Vec& abs_errors) {
  fused.resize(ds.size(), model.config().dim);
  abs_errors.resize(ds.size());
  for (Index i = 0; i < ds.size(); ++i) {
    const auto fw = model.forward(ds.samples[static_cast<std::size_t>(i)]);
    fused.row(i) = fw.fused.transpose();
    abs_errors(i) = std::abs(fw.prediction - ds.samples[static_cast<std::size_t>(i)].label);
  }
}

}  // namespace agfn
