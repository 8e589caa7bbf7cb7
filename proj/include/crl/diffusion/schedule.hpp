#pragma once

#include <cstddef>
#include <vector>

#include "crl/numkit/tensor.hpp"

namespace crl::diffusion {

// Index 0 is the clean-data convention (beta 0, alpha_bar 1); steps are 1..T.
struct DiffusionSchedule {
  std::size_t T = 0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;
};

// Linear betas from beta_start to beta_end. Throws for T < 2.
DiffusionSchedule make_schedule(std::size_t T = 1000, double beta_start = 1e-4, double beta_end = 0.02);

// z_t = sqrt(alpha_bar_t)·z0 + sqrt(1 - alpha_bar_t)·eps, one t per row.
nk::Tensor q_sample(const nk::Tensor& z0, const std::vector<std::size_t>& t, const nk::Tensor& eps,
                    const DiffusionSchedule& sched);

// Evenly spaced descending timesteps T = t_K > ... > t_1 >= 1 used by
// n-step samplers; the chain then ends at t = 0.
std::vector<std::size_t> step_subsequence(std::size_t T, std::size_t n_steps);

// Standard deviation of the reverse transition t -> t_prev for the
// generalized (DDIM-family) sampler: eta = 0 deterministic, eta = 1 ancestral.
double transition_sigma(const DiffusionSchedule& sched, std::size_t t, std::size_t t_prev, double eta);

}  // namespace crl::diffusion
