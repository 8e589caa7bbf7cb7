#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "crl/diffusion/train.hpp"
#include "crl/grpo/objective.hpp"
#include "crl/rewards/total.hpp"

namespace crl::grpo {

enum class Algorithm { Grpo, Reinforce };

const char* algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

struct GrpoConfig {
  std::uint64_t seed = 0;
  Algorithm algorithm = Algorithm::Grpo;
  std::size_t group_size = 16;          // published: 64
  std::size_t conditions_per_step = 4;  // published: 5
  std::size_t rollout_steps = 50;
  double eta = 1.0;
  ObjectiveConfig objective;
  double lr = 1e-5;
  double weight_decay = 0.0;
  double max_grad_norm = 1.0;
  std::size_t inner_batches = 2;
  std::size_t patience = 500;
  double plateau_tol = 1e-3;
  std::size_t max_steps = 500;
  std::size_t checkpoint_every = 100;
  double std_floor = 1e-8;
  bool learnable_sigma = false;
};

// Frozen pieces shared by every RL step.
struct RlEnvironment {
  const vae::Vae& vae;
  const diffusion::LatentStats& stats;
  const diffusion::DiffusionSchedule& sched;
  const rewards::RewardModel& rewards;
  std::vector<int> n_atoms_pool;  // empirical draws: one entry per corpus crystal
};

struct GroupRollout {
  Condition cond;
  std::vector<LatentTrajectory> trajectories;
  std::vector<crystal::Crystal> crystals;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

// Decodes normalized latents through the frozen decoder.
std::vector<crystal::Crystal> decode_latents(const vae::Vae& vae, const diffusion::LatentStats& stats,
                                             const Tensor& z0_normalized, const std::vector<int>& n_atoms);

// One group of G ancestral rollouts per condition; stream for rollout i of
// group g at `step` is keyed by (seed, step, g, i).
std::vector<GroupRollout> rollout_groups(const Denoiser& policy, const RlEnvironment& env,
                                         const std::vector<Condition>& conds, std::size_t group_size,
                                         std::size_t n_steps, std::uint64_t seed, std::size_t step, double eta = 1.0);

// Conditions for one step: n_atoms drawn from the empirical pool.
std::vector<Condition> sample_conditions(const std::vector<int>& pool, std::size_t n, std::uint64_t seed,
                                         std::size_t step);

struct RlLogRow {
  std::size_t step = 0;
  double mean_reward = 0.0;  // min-max normalized total
  double raw_score = 0.0;    // weighted sum of raw component means
  std::map<std::string, double> components;  // raw means
  double adv_var_group = 0.0;  // mean within-group variance of r − group mean
  double adv_var_batch = 0.0;  // variance of r − batch mean
  double kl = 0.0;
  double entropy = 0.0;
  double mean_ratio = 1.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
  std::size_t distinct_formulas = 0;
};

std::string rl_log_header(const std::vector<std::string>& components);
std::string rl_log_line(const RlLogRow& row, const std::vector<std::string>& components);

struct RlResult {
  Denoiser policy;
  std::vector<RlLogRow> log;
  std::string stop_reason;
};

struct RlCallbacks {
  std::function<void(const RlLogRow&)> on_step;
  std::function<void(std::size_t, const Denoiser&)> on_checkpoint;
};

// Throws std::runtime_error when a non-finite loss recurs after one
// restore-and-halve-lr recovery.
RlResult train_rl(const Denoiser& pretrained, const RlEnvironment& env, const GrpoConfig& cfg,
                  const RlCallbacks& callbacks = {});

}  // namespace crl::grpo
