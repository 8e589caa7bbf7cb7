#pragma once

#include <functional>
#include <vector>

#include "crl/crystal/amd.hpp"
#include "crl/numkit/optim.hpp"
#include "crl/vae/vae.hpp"

namespace crl::vae {

struct VaeTrainConfig {
  std::uint64_t seed = 0;
  std::size_t batch_size = 32;  // published: 256
  double lr = 2e-3;             // published: 1e-4
  double weight_decay = 0.0;
  double lr_final_fraction = 5e-4;  // cosine decay from lr to lr·fraction over max_steps
  std::size_t max_steps = 30000;
  std::size_t eval_every = 250;
  std::size_t patience = 12;  // evaluations without validation improvement
  double val_fraction = 0.1;
  double augment_prob = 0.0;  // probability of translation+rotation augmentation per sample
  ElboWeights weights{};
};

struct VaeLogRow {
  std::size_t step = 0;
  ElboParts train;
  double val_total = 0.0;
};

struct VaeTrainResult {
  Vae model;
  std::vector<VaeLogRow> log;
  std::vector<std::size_t> train_idx, val_idx;
  std::size_t best_step = 0;
  double best_val = 0.0;
};

// Deterministic split of [0, n) into (train, validation).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double val_fraction,
                                                                           std::uint64_t seed);

// Throws std::invalid_argument when the training split is smaller than ten
// batches, std::runtime_error on a non-finite loss.
VaeTrainResult train_vae(const std::vector<Crystal>& corpus, const VaeConfig& model_cfg, const VaeTrainConfig& cfg,
                         const std::function<void(const VaeLogRow&)>& on_eval = {});

double validation_loss(const Vae& model, const std::vector<Crystal>& crystals, const ElboWeights& w);

// Fraction of crystals whose decode(encode(c).mu) is equivalent to c.
double reconstruction_rate(const Vae& model, const std::vector<Crystal>& crystals,
                           const crystal::MatchConfig& match = {}, const crystal::AmdConfig& amd_cfg = {});

}  // namespace crl::vae
