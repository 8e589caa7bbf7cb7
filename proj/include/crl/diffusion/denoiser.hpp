#pragma once

#include <optional>
#include <vector>

#include "crl/numkit/autodiff.hpp"

namespace crl::diffusion {

using nk::ParamSet;
using nk::Tensor;
using nk::Var;

// Conditioning for one sample: atom count (always present) and an optional
// scalar property. A missing property selects the learned null token.
struct Condition {
  int n_atoms = 1;
  std::optional<double> property;
};

struct DenoiserConfig {
  std::size_t latent_dim = 8;
  std::size_t max_atoms = 8;
  std::size_t time_embed = 32;
  std::size_t cond_embed = 32;
  std::size_t hidden = 256;
  std::size_t blocks = 2;             // residual blocks after the input layer
  double property_center = 3.0;       // property is fed as (p - center) / scale
  double property_scale = 2.0;
};

class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(const DenoiserConfig& cfg, std::uint64_t seed);
  Denoiser(const DenoiserConfig& cfg, ParamSet params);

  const DenoiserConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // eps_theta(z_t, t, cond) for a batch; t and cond are per row.
  Var predict(nk::Tape& tape, const ParamSet& params, Var z, const std::vector<std::size_t>& t,
              const std::vector<Condition>& cond) const;
  Tensor predict(const Tensor& z, const std::vector<std::size_t>& t, const std::vector<Condition>& cond) const;

 private:
  DenoiserConfig cfg_;
  ParamSet params_;
};

struct GuidanceConfig {
  double scale = 2.0;         // λ
  double cond_dropout = 0.1;  // property dropout during training
};

// eps_null + λ·(eps_cond − eps_null), evaluated as (1 − λ)·eps_null + λ·eps_cond.
Tensor guided_eps(const Tensor& eps_cond, const Tensor& eps_null, double scale);
// Same combination on the tape, as used by the guided sampler.
Var guided_eps(Var eps_cond, Var eps_null, double scale);

// Drops the property from every condition.
std::vector<Condition> without_property(const std::vector<Condition>& cond);

}  // namespace crl::diffusion
