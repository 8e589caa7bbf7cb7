#include "crl/vae/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace crl::vae {

using namespace crl::nk;

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double val_fraction,
                                                                           std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(seed, "vae.split");
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n_val = static_cast<std::size_t>(std::round(val_fraction * static_cast<double>(n)));
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {train, val};
}

double validation_loss(const Vae& model, const std::vector<Crystal>& crystals, const ElboWeights& w) {
  if (crystals.empty()) return 0.0;
  Tape tape(false);
  const Batch batch = make_batch(crystals, model.config());
  const Tensor eps = Tensor::zeros({batch.size, model.config().latent_dim});
  return elbo_loss(tape, model, model.params(), batch, eps, w).value().item();
}

VaeTrainResult train_vae(const std::vector<Crystal>& corpus, const VaeConfig& model_cfg, const VaeTrainConfig& cfg,
                         const std::function<void(const VaeLogRow&)>& on_eval) {
  VaeTrainResult res;
  std::tie(res.train_idx, res.val_idx) = split_indices(corpus.size(), cfg.val_fraction, cfg.seed);
  if (cfg.batch_size == 0 || res.train_idx.size() < 10 * cfg.batch_size) {
    throw std::invalid_argument("train_vae: training split must hold at least 10 batches");
  }
  std::vector<Crystal> val;
  for (std::size_t i : res.val_idx) val.push_back(corpus[i]);

  Vae model(model_cfg, cfg.seed);
  AdamW opt(AdamWConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay, 0.0});
  ParamSet best = model.params();
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  std::vector<std::size_t> order = res.train_idx;
  std::size_t cursor = order.size();
  std::size_t epoch = 0;
  ElboParts running;
  std::size_t running_n = 0;
  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    std::vector<Crystal> batch_crystals;
    RngStream aug(cfg.seed, "vae.augment", step);
    while (batch_crystals.size() < cfg.batch_size) {
      if (cursor == order.size()) {
        RngStream shuffle(cfg.seed, "vae.shuffle", epoch++);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
        cursor = 0;
      }
      const Crystal& c = corpus[order[cursor++]];
      batch_crystals.push_back(aug.uniform() < cfg.augment_prob ? augment(c, aug) : c);
    }
    const Batch batch = make_batch(batch_crystals, model_cfg);
    RngStream noise(cfg.seed, "vae.eps", step);
    Tensor eps = noise.normal({batch.size, model_cfg.latent_dim});
    Tape tape;
    ElboParts parts;
    Var loss = elbo_loss(tape, model, model.params(), batch, eps, cfg.weights, &parts);
    if (!std::isfinite(parts.total)) {
      throw std::runtime_error("train_vae: non-finite loss at step " + std::to_string(step) +
                               " (species " + std::to_string(parts.species) + ", lengths " +
                               std::to_string(parts.lengths) + ", kl " + std::to_string(parts.kl) + ")");
    }
    const double progress = static_cast<double>(step - 1) / static_cast<double>(cfg.max_steps);
    const double floor = cfg.lr_final_fraction;
    opt.set_lr(cfg.lr * (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress))));
    opt.step(model.params(), tape.gradient(loss, model.params()));
    running.species += parts.species;
    running.lengths += parts.lengths;
    running.angles += parts.angles;
    running.coords += parts.coords;
    running.kl += parts.kl;
    running.total += parts.total;
    ++running_n;

    if (step % cfg.eval_every == 0 || step == cfg.max_steps) {
      VaeLogRow row;
      row.step = step;
      const double n = static_cast<double>(running_n);
      row.train = {running.species / n, running.lengths / n, running.angles / n,
                   running.coords / n,  running.kl / n,      running.total / n};
      running = {};
      running_n = 0;
      row.val_total = validation_loss(model, val, cfg.weights);
      res.log.push_back(row);
      if (on_eval) on_eval(row);
      if (row.val_total < best_val) {
        best_val = row.val_total;
        best = model.params();
        res.best_step = step;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
  }
  model.params() = best;
  res.model = std::move(model);
  res.best_val = best_val;
  return res;
}

double reconstruction_rate(const Vae& model, const std::vector<Crystal>& crystals, const crystal::MatchConfig& match,
                           const crystal::AmdConfig& amd_cfg) {
  if (crystals.empty()) return 0.0;
  const auto codes = model.encode(crystals);
  Tensor z({crystals.size(), model.config().latent_dim});
  std::vector<int> n_atoms;
  for (std::size_t i = 0; i < crystals.size(); ++i) {
    for (std::size_t k = 0; k < model.config().latent_dim; ++k) z.at(i, k) = codes[i].mu[k];
    n_atoms.push_back(static_cast<int>(crystals[i].size()));
  }
  const auto decoded = model.decode(z, n_atoms);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < crystals.size(); ++i) hits += crystal::equivalent(crystals[i], decoded[i], match, amd_cfg);
  return static_cast<double>(hits) / static_cast<double>(crystals.size());
}

}  // namespace crl::vae
