#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "crl/diffusion/denoiser.hpp"
#include "crl/diffusion/schedule.hpp"
#include "crl/numkit/rng.hpp"

namespace crl::diffusion {

// Coefficients of the reverse transition t -> t_prev:
// mean = a·z_t + b·eps_theta, standard deviation sigma.
struct TransitionCoefs {
  double a = 0.0, b = 0.0, sigma = 0.0;
};
TransitionCoefs transition_coefs(const DiffusionSchedule& sched, std::size_t t, std::size_t t_prev, double eta);

struct LatentTrajectory {
  Condition cond;
  std::vector<std::size_t> steps;  // t_K .. t_1; the chain ends at t = 0
  Tensor states;                   // (K+1, d): z_{t_K}, ..., z_{t_1}, z_0
  std::vector<double> logprobs;    // K entries; the deterministic final step is 0
  double eta = 1.0;

  std::size_t t_prev(std::size_t k) const { return k + 1 < steps.size() ? steps[k + 1] : 0; }
  std::vector<double> z0() const;
};

// Noise prediction for a batch of rows at a shared timestep.
using EpsFn = std::function<Tensor(const Tensor& z, std::size_t t, const std::vector<Condition>& cond)>;

EpsFn eps_fn(const Denoiser& model, std::optional<double> guidance = std::nullopt);

// Parameter holding an optional learnable log-multiplier on every transition
// standard deviation; absent means the schedule values are used as is.
inline constexpr const char* kLogSigmaParam = "den.log_sigma";
double sigma_multiplier(const ParamSet& params);

// Deterministic eta = 0 sampler from the given z_T rows. With `guidance`,
// eps is the classifier-free combination at that scale.
Tensor ddim_sample(const Denoiser& model, const DiffusionSchedule& sched, const std::vector<Condition>& cond,
                   std::size_t n_steps, const Tensor& z_T, std::optional<double> guidance = std::nullopt);
Tensor ddim_sample(const EpsFn& eps, const DiffusionSchedule& sched, const std::vector<Condition>& cond,
                   std::size_t n_steps, const Tensor& z_T);

// Stochastic chain with exact per-step Gaussian log-densities; one stream per
// row supplies z_T and the transition noise.
std::vector<LatentTrajectory> ancestral_sample_with_logprob(const Denoiser& model, const DiffusionSchedule& sched,
                                                            const std::vector<Condition>& cond, std::size_t n_steps,
                                                            std::vector<nk::RngStream>& streams, double eta = 1.0);
std::vector<LatentTrajectory> ancestral_sample_with_logprob(const EpsFn& eps, std::size_t latent_dim,
                                                            const DiffusionSchedule& sched,
                                                            const std::vector<Condition>& cond, std::size_t n_steps,
                                                            std::vector<nk::RngStream>& streams, double eta = 1.0,
                                                            double sigma_mult = 1.0);

// log N(z_prev; mean_theta(z_t), sigma² I). Throws for a zero-variance step.
double transition_logprob(const std::vector<double>& z_prev, const std::vector<double>& z_t, std::size_t t,
                          std::size_t t_prev, const Condition& cond, const Denoiser& model, const ParamSet& params,
                          const DiffusionSchedule& sched, double eta = 1.0);

// Batched form on the tape, (R, 1), differentiable in `params`.
Var transition_logprob(nk::Tape& tape, const Denoiser& model, const ParamSet& params, const Tensor& z_t,
                       const Tensor& z_prev, const std::vector<std::size_t>& t, const std::vector<std::size_t>& t_prev,
                       const std::vector<Condition>& cond, const DiffusionSchedule& sched, double eta = 1.0);

double gaussian_logpdf(const std::vector<double>& x, const std::vector<double>& mean, double sigma);

}  // namespace crl::diffusion
