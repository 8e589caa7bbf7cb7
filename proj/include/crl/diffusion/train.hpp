#pragma once

#include <functional>
#include <vector>

#include "crl/diffusion/denoiser.hpp"
#include "crl/diffusion/schedule.hpp"
#include "crl/numkit/rng.hpp"

namespace crl::diffusion {

// Per-dimension standardization applied to encoder latents before diffusion.
struct LatentStats {
  std::vector<double> mean, std;

  Tensor normalize(const Tensor& z) const;
  Tensor denormalize(const Tensor& z) const;
};
LatentStats fit_latent_stats(const Tensor& z);

struct LatentDataset {
  Tensor z;  // (N, d), already normalized
  std::vector<Condition> cond;
};

// Mean over rows of ||eps − eps_theta(q_sample(z0, t, eps), t, c)||², with
// t ~ U{1..T}; each row's property is dropped with probability `cond_dropout`.
Var ddpm_loss(nk::Tape& tape, const Denoiser& model, const ParamSet& params, const Tensor& z0,
              const std::vector<Condition>& cond, const DiffusionSchedule& sched, nk::RngStream& stream,
              double cond_dropout = 0.0);

struct LdmTrainConfig {
  std::uint64_t seed = 0;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  double lr_final_fraction = 0.01;
  double weight_decay = 0.0;
  std::size_t max_steps = 10000;
  std::size_t log_every = 500;
  double cond_dropout = 0.0;  // set > 0 for a guidance-capable model
};

struct LdmLogRow {
  std::size_t step = 0;
  double loss = 0.0;
};

struct LdmTrainResult {
  Denoiser model;
  std::vector<LdmLogRow> log;
};

LdmTrainResult train_ldm(const LatentDataset& data, const DenoiserConfig& model_cfg, const LdmTrainConfig& cfg,
                         const DiffusionSchedule& sched, const std::function<void(const LdmLogRow&)>& on_log = {});

}  // namespace crl::diffusion
