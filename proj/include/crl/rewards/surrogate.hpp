#pragma once

#include <cstdint>
#include <vector>

#include "crl/numkit/autodiff.hpp"

namespace crl::rewards {

using nk::ParamSet;
using nk::Tensor;

struct SurrogateConfig {
  std::uint64_t seed = 0;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::size_t max_steps = 6000;
  std::size_t eval_every = 100;
  std::size_t patience = 15;  // evaluations without validation improvement
  double val_fraction = 0.1;
};

// Feed-forward regressor on standardized embeddings. Standardization
// constants live in the parameter set under `sur.x_*` and `sur.y_*`.
class Surrogate {
 public:
  Surrogate() = default;
  explicit Surrogate(ParamSet params);

  bool trained() const { return !params_.empty(); }
  const ParamSet& params() const { return params_; }
  std::size_t input_dim() const;

  double predict(const std::vector<double>& x) const;
  std::vector<double> predict(const Tensor& x) const;
  // Standardized-target output for standardized inputs; used in training.
  nk::Var forward(nk::Tape& tape, const ParamSet& params, nk::Var x_std) const;

 private:
  ParamSet params_;
  std::size_t layers_ = 0;
};

struct SurrogateReport {
  double train_mae = 0.0;
  double val_mae = 0.0;
  double baseline_mae = 0.0;  // validation MAE of the training-mean predictor
  double target_std = 0.0;    // over all targets
  std::size_t best_step = 0;
};

struct SurrogateResult {
  Surrogate model;
  SurrogateReport report;
  std::vector<std::size_t> train_idx, val_idx;
};

// MSE regression of y on rows of x with early stopping on validation MAE.
// Throws std::runtime_error on a non-finite loss.
SurrogateResult train_surrogate(const Tensor& x, const std::vector<double>& y, const SurrogateConfig& cfg);

double mean_abs_error(const std::vector<double>& pred, const std::vector<double>& y);

}  // namespace crl::rewards
