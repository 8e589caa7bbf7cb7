#pragma once

#include <vector>

#include "crl/diffusion/sampler.hpp"

namespace crl::grpo {

using diffusion::Condition;
using diffusion::Denoiser;
using diffusion::DiffusionSchedule;
using diffusion::LatentTrajectory;
using nk::ParamSet;
using nk::Tensor;
using nk::Var;

// (r − mean)/std with the population std; all zeros when std < std_floor.
// Throws std::invalid_argument for fewer than 2 rewards.
std::vector<double> normalized_advantages(const std::vector<double>& rewards, double std_floor = 1e-8);

// Population variance of r − mean(r).
double centered_variance(const std::vector<double>& rewards);

// min(ρ·A, clip(ρ, 1 − ε, 1 + ε)·A).
double clipped_term(double ratio, double advantage, double eps);

// k3 estimator of KL(π_θ ‖ π_ref) at one sampled transition.
double k3(double logp, double logp_ref);

// Entropy of N(·, sigma² I_d).
double gaussian_entropy(std::size_t d, double sigma);
// Summed entropy of the stochastic transitions of an n-step rollout.
double policy_entropy(const DiffusionSchedule& sched, std::size_t n_steps, std::size_t d, double eta = 1.0,
                      double sigma_mult = 1.0);

struct ObjectiveConfig {
  double clip_eps = 1e-3;
  double kl_weight = 1.0;       // β
  double entropy_weight = 1e-5;  // γ
};

// Stochastic transitions of a set of trajectories, one row each.
struct TransitionBatch {
  Tensor z_t, z_prev;
  std::vector<std::size_t> t, t_prev;
  std::vector<Condition> cond;
  std::vector<double> old_logp;
  std::vector<double> ref_logp;  // filled by fill_reference_logprobs
  std::vector<double> advantage;
  std::size_t trajectories = 0;
  std::size_t steps_per_trajectory = 0;

  std::size_t size() const { return t.size(); }
};

// Rows for trajectories [begin, end); `advantages` is indexed by trajectory.
TransitionBatch flatten_transitions(const std::vector<LatentTrajectory>& traj, const std::vector<double>& advantages,
                                    std::size_t begin, std::size_t end);

void fill_reference_logprobs(TransitionBatch& batch, const Denoiser& reference, const DiffusionSchedule& sched,
                             double eta = 1.0);

struct LossParts {
  double surrogate = 0.0;  // per-trajectory sum over steps, averaged over trajectories
  double kl = 0.0;         // mean k3 over transitions
  double entropy = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
};

// Negated clipped objective for the rows of `batch`, scaled by
// batch.trajectories / total_trajectories so that gradients of the inner
// batches of one step add up to the full-batch gradient.
Var grpo_loss(nk::Tape& tape, const Denoiser& model, const ParamSet& params, const TransitionBatch& batch,
              const DiffusionSchedule& sched, const ObjectiveConfig& cfg, std::size_t total_trajectories,
              LossParts* parts = nullptr, double eta = 1.0);

// Negated score-function objective Σ_t log p_θ · A, same scaling as grpo_loss.
Var reinforce_loss(nk::Tape& tape, const Denoiser& model, const ParamSet& params, const TransitionBatch& batch,
                   const DiffusionSchedule& sched, std::size_t total_trajectories, LossParts* parts = nullptr,
                   double eta = 1.0);

}  // namespace crl::grpo
