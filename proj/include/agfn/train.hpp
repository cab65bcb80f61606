#pragma once

#include "agfn/model.hpp"
#include "agfn/numerics.hpp"

#include <vector>

namespace agfn {

struct TrainConfig {
  double lr_main = 1e-4;
  double lr_final = 1e-6;
  Index batch_size = 32;
  double weight_decay = 0.01;
  double vat_lambda = 0.1;
  Index vat_steps = 5;
  double vat_epsilon = 1.0;
  double vat_xi = 1e-6;
  double clip_norm = 1.0;
  Index max_epochs = 100;
  Index patience = 8;
  std::uint64_t seed = 1111;
};

// Mean absolute difference.
double l1_loss(const Vec& pred, const Vec& target);

// Cosine annealing from lr_main (step 0) to lr_final (step == total_steps).
double cosine_lr(Index step, Index total_steps, double lr_main, double lr_final);

// Decoupled weight decay Adam. step() consumes the gradients currently stored
// on the parameters; decay multiplies the parameter before the adaptive
// update, so a zero-gradient step is exactly theta *= (1 - lr * wd).
class AdamW {
 public:
  explicit AdamW(std::vector<Param*> params, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8);

  void step(double lr, double weight_decay);
  std::int64_t step_count() const { return t_; }

 private:
  std::vector<Param*> params_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

struct VatConfig {
  double epsilon = 1.0;
  double xi = 1e-6;
  Index steps = 5;
};

// Power-iteration search for the adversarial direction of the consistency
// loss MSE(f(h + xi d), f(h)). Returns epsilon * d with ||d|| = 1; if a zero
// gradient is hit the current direction is kept.
Vec vat_perturbation(ScalarField& f, const Vec& h, const VatConfig& cfg, Rng& rng);

struct BatchLoss {
  double total = 0.0;
  double l1 = 0.0;
  double consistency = 0.0;  // pre-lambda mean squared prediction shift
};

// L1 + vat_lambda * MSE(f(h_fused + r_adv), f(h_fused)) over one batch.
// r_adv is held constant during backpropagation. With with_grads the exact
// gradient of this objective is accumulated on the model parameters.
// The VAT path is skipped entirely when vat_lambda == 0 unless
// force_vat_code_path is set (test hook for the equivalence contract).
BatchLoss batch_loss(AgfnModel& model, const Dataset& data, const std::vector<Index>& batch,
                     const TrainConfig& cfg, Rng& rng, bool with_grads,
                     bool force_vat_code_path = false);

struct EpochStats {
  Index epoch = 0;
  double train_loss = 0.0;
  double val_mae = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  Index best_epoch = 0;
  double best_val_mae = 0.0;
  Index steps_taken = 0;
};

struct TrainHooks {
  bool force_vat_code_path = false;
};

// Epoch loop: seeded shuffle, batch gradients, global-norm clip, AdamW with
// cosine annealing over max_epochs * batches_per_epoch steps, early stopping
// on validation MAE. The returned model holds the best-validation parameters.
TrainResult train(AgfnModel& model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

// Inference helpers.
Vec predict_all(AgfnModel& model, const Dataset& ds);
Vec labels_of(const Dataset& ds);
// Fused representations as rows plus absolute prediction errors.
void collect_fused(AgfnModel& model, const Dataset& ds, Mat& fused, Vec& abs_errors);

}  // namespace agfn
