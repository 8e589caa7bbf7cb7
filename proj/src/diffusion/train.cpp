#include "crl/diffusion/train.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "crl/numkit/optim.hpp"

namespace crl::diffusion {

using namespace crl::nk;

Tensor LatentStats::normalize(const Tensor& z) const {
  Tensor out(z.shape());
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t c = 0; c < z.cols(); ++c) out.at(r, c) = (z.at(r, c) - mean.at(c)) / std.at(c);
  return out;
}

Tensor LatentStats::denormalize(const Tensor& z) const {
  Tensor out(z.shape());
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t c = 0; c < z.cols(); ++c) out.at(r, c) = z.at(r, c) * std.at(c) + mean.at(c);
  return out;
}

LatentStats fit_latent_stats(const Tensor& z) {
  const std::size_t n = z.rows(), d = z.cols();
  if (n < 2) throw std::invalid_argument("fit_latent_stats: need at least 2 rows");
  LatentStats s;
  s.mean.assign(d, 0.0);
  s.std.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) s.mean[c] += z.at(r, c) / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) s.std[c] += std::pow(z.at(r, c) - s.mean[c], 2) / static_cast<double>(n);
  for (double& v : s.std) v = std::max(std::sqrt(v), 1e-8);
  return s;
}

Var ddpm_loss(Tape& tape, const Denoiser& model, const ParamSet& params, const Tensor& z0,
              const std::vector<Condition>& cond, const DiffusionSchedule& sched, RngStream& stream,
              double cond_dropout) {
  const std::size_t b = z0.rows();
  std::vector<std::size_t> t(b);
  for (auto& v : t) v = 1 + stream.below(sched.T);
  const Tensor eps = stream.normal(z0.shape());
  std::vector<Condition> c = cond;
  if (cond_dropout > 0.0) {
    for (auto& row : c)
      if (stream.uniform() < cond_dropout) row.property.reset();
  }
  const Tensor zt = q_sample(z0, t, eps, sched);
  Var pred = model.predict(tape, params, tape.constant(zt), t, c);
  return scale(sum(square(sub(pred, tape.constant(eps)))), 1.0 / static_cast<double>(b));
}

LdmTrainResult train_ldm(const LatentDataset& data, const DenoiserConfig& model_cfg, const LdmTrainConfig& cfg,
                         const DiffusionSchedule& sched, const std::function<void(const LdmLogRow&)>& on_log) {
  const std::size_t n = data.z.rows();
  if (n == 0 || data.cond.size() != n) throw std::invalid_argument("train_ldm: empty or inconsistent dataset");
  LdmTrainResult res;
  res.model = Denoiser(model_cfg, cfg.seed);
  AdamW opt(AdamWConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay, 1.0});
  double running = 0.0;
  std::size_t running_n = 0;
  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    RngStream stream(cfg.seed, "ldm.step", step);
    const std::size_t b = std::min(cfg.batch_size, n);
    Tensor z0({b, data.z.cols()});
    std::vector<Condition> cond;
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t row = stream.below(n);
      for (std::size_t k = 0; k < data.z.cols(); ++k) z0.at(i, k) = data.z.at(row, k);
      cond.push_back(data.cond[row]);
    }
    Tape tape;
    Var loss = ddpm_loss(tape, res.model, res.model.params(), z0, cond, sched, stream, cfg.cond_dropout);
    const double value = loss.value().item();
    if (!std::isfinite(value)) throw std::runtime_error("train_ldm: non-finite loss at step " + std::to_string(step));
    const double progress = static_cast<double>(step - 1) / static_cast<double>(cfg.max_steps);
    const double floor = cfg.lr_final_fraction;
    opt.set_lr(cfg.lr * (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress))));
    opt.step(res.model.params(), tape.gradient(loss, res.model.params()));
    running += value;
    ++running_n;
    if (step % cfg.log_every == 0 || step == cfg.max_steps) {
      res.log.push_back({step, running / static_cast<double>(running_n)});
      if (on_log) on_log(res.log.back());
      running = 0.0;
      running_n = 0;
    }
  }
  return res;
}

}  // namespace crl::diffusion
