#include "crl/grpo/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace crl::grpo {

using namespace crl::nk;

std::vector<double> normalized_advantages(const std::vector<double>& rewards, double std_floor) {
  const std::size_t n = rewards.size();
  if (n < 2) throw std::invalid_argument("normalized_advantages: need at least 2 rewards");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(n);
  const double sd = std::sqrt(centered_variance(rewards));
  std::vector<double> out(n, 0.0);
  if (sd < std_floor) return out;
  for (std::size_t i = 0; i < n; ++i) out[i] = (rewards[i] - mean) / sd;
  return out;
}

double centered_variance(const std::vector<double>& rewards) {
  if (rewards.empty()) return 0.0;
  double mean = 0.0, var = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  for (double r : rewards) var += (r - mean) * (r - mean);
  return var / static_cast<double>(rewards.size());
}

double clipped_term(double ratio, double advantage, double eps) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

double k3(double logp, double logp_ref) {
  const double log_r = logp_ref - logp;
  return std::exp(log_r) - log_r - 1.0;
}

double gaussian_entropy(std::size_t d, double sigma) {
  const double dd = static_cast<double>(d);
  return 0.5 * dd * (1.0 + std::log(2.0 * std::numbers::pi)) + dd * std::log(sigma);
}

double policy_entropy(const DiffusionSchedule& sched, std::size_t n_steps, std::size_t d, double eta,
                      double sigma_mult) {
  const auto steps = diffusion::step_subsequence(sched.T, n_steps);
  double h = 0.0;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const std::size_t t_prev = k + 1 < steps.size() ? steps[k + 1] : 0;
    const double sigma = diffusion::transition_sigma(sched, steps[k], t_prev, eta);
    if (sigma > 0.0) h += gaussian_entropy(d, sigma * sigma_mult);
  }
  return h;
}

TransitionBatch flatten_transitions(const std::vector<LatentTrajectory>& traj, const std::vector<double>& advantages,
                                    std::size_t begin, std::size_t end) {
  if (end > traj.size() || begin >= end || advantages.size() != traj.size()) {
    throw std::invalid_argument("flatten_transitions: bad trajectory range");
  }
  TransitionBatch b;
  const std::size_t d = traj[begin].states.cols();
  std::vector<double> zt, zp;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& tr = traj[i];
    std::size_t stochastic = 0;
    for (std::size_t k = 0; k < tr.steps.size(); ++k) {
      if (tr.t_prev(k) == 0) continue;  // deterministic final step
      ++stochastic;
      for (std::size_t j = 0; j < d; ++j) {
        zt.push_back(tr.states.at(k, j));
        zp.push_back(tr.states.at(k + 1, j));
      }
      b.t.push_back(tr.steps[k]);
      b.t_prev.push_back(tr.t_prev(k));
      b.cond.push_back(tr.cond);
      b.old_logp.push_back(tr.logprobs[k]);
      b.advantage.push_back(advantages[i]);
    }
    if (i == begin) b.steps_per_trajectory = stochastic;
  }
  const std::size_t rows = b.t.size();
  b.z_t = Tensor::matrix(rows, d, std::move(zt));
  b.z_prev = Tensor::matrix(rows, d, std::move(zp));
  b.trajectories = end - begin;
  return b;
}

void fill_reference_logprobs(TransitionBatch& batch, const Denoiser& reference, const DiffusionSchedule& sched,
                             double eta) {
  Tape tape(false);
  const Tensor lp = diffusion::transition_logprob(tape, reference, reference.params(), batch.z_t, batch.z_prev, batch.t,
                                                  batch.t_prev, batch.cond, sched, eta)
                        .value();
  batch.ref_logp.assign(lp.data().begin(), lp.data().end());
}

namespace {

Tensor column(const std::vector<double>& v) { return Tensor::matrix(v.size(), 1, v); }

Var entropy_term(Tape& tape, const ParamSet& params, const TransitionBatch& batch, const DiffusionSchedule& sched,
                 double eta, double* value) {
  const std::size_t d = batch.z_t.cols();
  // Entropy of one trajectory: transitions of the first trajectory in the batch.
  double h = 0.0;
  for (std::size_t r = 0; r < batch.steps_per_trajectory; ++r)
    h += gaussian_entropy(d, diffusion::transition_sigma(sched, batch.t[r], batch.t_prev[r], eta));
  const auto it = params.find(diffusion::kLogSigmaParam);
  if (it == params.end()) {
    *value = h;
    return tape.constant(Tensor::scalar(h));
  }
  const double k = static_cast<double>(batch.steps_per_trajectory * d);
  *value = h + k * it->second.item();
  return add_scalar(scale(reshape(tape.param(params, diffusion::kLogSigmaParam), {}), k), h);
}

}  // namespace

Var grpo_loss(Tape& tape, const Denoiser& model, const ParamSet& params, const TransitionBatch& batch,
              const DiffusionSchedule& sched, const ObjectiveConfig& cfg, std::size_t total_trajectories,
              LossParts* parts, double eta) {
  if (batch.ref_logp.size() != batch.size()) throw std::invalid_argument("grpo_loss: reference log-probs missing");
  const double n_traj = static_cast<double>(batch.trajectories);
  const double weight = n_traj / static_cast<double>(total_trajectories);
  Var logp = diffusion::transition_logprob(tape, model, params, batch.z_t, batch.z_prev, batch.t, batch.t_prev,
                                           batch.cond, sched, eta);
  Var adv = tape.constant(column(batch.advantage));
  Var ratio = exp(sub(logp, tape.constant(column(batch.old_logp))));
  Var surr = minimum(mul(ratio, adv), mul(clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps), adv));
  Var surrogate = scale(sum(surr), 1.0 / n_traj);
  Var log_r = sub(tape.constant(column(batch.ref_logp)), logp);
  Var kl = mean(add_scalar(sub(exp(log_r), log_r), -1.0));
  double h = 0.0;
  Var entropy = entropy_term(tape, params, batch, sched, eta, &h);
  Var objective = add(sub(surrogate, scale(kl, cfg.kl_weight)), scale(entropy, cfg.entropy_weight));
  if (parts) {
    parts->surrogate = surrogate.value().item();
    parts->kl = kl.value().item();
    parts->entropy = h;
    const Tensor& rv = ratio.value();
    double rs = 0.0, clipped = 0.0;
    for (double v : rv.data()) {
      rs += v;
      if (std::abs(v - 1.0) > cfg.clip_eps) clipped += 1.0;
    }
    parts->mean_ratio = rs / static_cast<double>(rv.size());
    parts->clip_fraction = clipped / static_cast<double>(rv.size());
  }
  return scale(objective, -weight);
}

Var reinforce_loss(Tape& tape, const Denoiser& model, const ParamSet& params, const TransitionBatch& batch,
                   const DiffusionSchedule& sched, std::size_t total_trajectories, LossParts* parts, double eta) {
  const double n_traj = static_cast<double>(batch.trajectories);
  const double weight = n_traj / static_cast<double>(total_trajectories);
  Var logp = diffusion::transition_logprob(tape, model, params, batch.z_t, batch.z_prev, batch.t, batch.t_prev,
                                           batch.cond, sched, eta);
  Var objective = scale(sum(mul(logp, tape.constant(column(batch.advantage)))), 1.0 / n_traj);
  if (parts) {
    parts->surrogate = objective.value().item();
    parts->mean_ratio = 1.0;
  }
  return scale(objective, -weight);
}

}  // namespace crl::grpo
