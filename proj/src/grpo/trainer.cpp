#include "crl/grpo/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "crl/numkit/optim.hpp"

namespace crl::grpo {

using namespace crl::nk;

const char* algorithm_name(Algorithm a) { return a == Algorithm::Grpo ? "grpo" : "reinforce"; }

Algorithm parse_algorithm(const std::string& name) {
  if (name == "grpo") return Algorithm::Grpo;
  if (name == "reinforce") return Algorithm::Reinforce;
  throw std::invalid_argument("unknown algorithm '" + name + "' (expected grpo or reinforce)");
}

std::vector<crystal::Crystal> decode_latents(const vae::Vae& vae, const diffusion::LatentStats& stats,
                                             const Tensor& z0_normalized, const std::vector<int>& n_atoms) {
  return vae.decode(stats.denormalize(z0_normalized), n_atoms);
}

std::vector<Condition> sample_conditions(const std::vector<int>& pool, std::size_t n, std::uint64_t seed,
                                         std::size_t step) {
  if (pool.empty()) throw std::invalid_argument("sample_conditions: empty n_atoms pool");
  RngStream rng(seed, "rl.conditions", step);
  std::vector<Condition> out(n);
  for (auto& c : out) c.n_atoms = pool[rng.below(pool.size())];
  return out;
}

std::vector<GroupRollout> rollout_groups(const Denoiser& policy, const RlEnvironment& env,
                                         const std::vector<Condition>& conds, std::size_t group_size,
                                         std::size_t n_steps, std::uint64_t seed, std::size_t step, double eta) {
  std::vector<Condition> flat;
  std::vector<RngStream> streams;
  const RngStream base(seed, "rl.rollout", step);
  for (std::size_t g = 0; g < conds.size(); ++g) {
    const RngStream group = base.child("group", g);
    for (std::size_t i = 0; i < group_size; ++i) {
      flat.push_back(conds[g]);
      streams.push_back(group.child("rollout", i));
    }
  }
  auto traj = diffusion::ancestral_sample_with_logprob(policy, env.sched, flat, n_steps, streams, eta);
  const std::size_t d = policy.config().latent_dim;
  Tensor z0({flat.size(), d});
  std::vector<int> n_atoms;
  for (std::size_t r = 0; r < traj.size(); ++r) {
    const auto row = traj[r].z0();
    for (std::size_t k = 0; k < d; ++k) z0.at(r, k) = row[k];
    n_atoms.push_back(flat[r].n_atoms);
  }
  const auto crystals = decode_latents(env.vae, env.stats, z0, n_atoms);
  std::vector<GroupRollout> out(conds.size());
  for (std::size_t g = 0; g < conds.size(); ++g) {
    out[g].cond = conds[g];
    for (std::size_t i = 0; i < group_size; ++i) {
      out[g].trajectories.push_back(std::move(traj[g * group_size + i]));
      out[g].crystals.push_back(crystals[g * group_size + i]);
    }
  }
  return out;
}

std::string rl_log_header(const std::vector<std::string>& components) {
  std::string h = "step,mean_reward,raw_score";
  for (const auto& c : components) h += "," + c;
  return h + ",adv_var_group,adv_var_batch,kl,entropy,mean_ratio,clip_fraction,grad_norm,lr,distinct_formulas";
}

std::string rl_log_line(const RlLogRow& row, const std::vector<std::string>& components) {
  std::ostringstream os;
  os << std::setprecision(10) << row.step << ',' << row.mean_reward << ',' << row.raw_score;
  for (const auto& c : components) {
    const auto it = row.components.find(c);
    os << ',' << (it == row.components.end() ? 0.0 : it->second);
  }
  os << ',' << row.adv_var_group << ',' << row.adv_var_batch << ',' << row.kl << ',' << row.entropy << ','
     << row.mean_ratio << ',' << row.clip_fraction << ',' << row.grad_norm << ',' << row.lr << ','
     << row.distinct_formulas;
  return os.str();
}

namespace {

struct StepOutcome {
  RlLogRow row;
  GradMap grads;
  bool finite = true;
};

StepOutcome run_step(const Denoiser& policy, const Denoiser& reference, const RlEnvironment& env,
                     const GrpoConfig& cfg, std::size_t step) {
  StepOutcome out;
  RlLogRow& row = out.row;
  row.step = step;
  const auto conds = sample_conditions(env.n_atoms_pool, cfg.conditions_per_step, cfg.seed, step);
  auto groups = rollout_groups(policy, env, conds, cfg.group_size, cfg.rollout_steps, cfg.seed, step, cfg.eta);

  std::vector<crystal::Crystal> all;
  for (const auto& g : groups) all.insert(all.end(), g.crystals.begin(), g.crystals.end());
  const auto ev = env.rewards.evaluate(all);
  const auto& total = ev.breakdown.total;

  std::vector<double> flat_adv;
  std::vector<LatentTrajectory> flat_traj;
  if (cfg.algorithm == Algorithm::Reinforce) flat_adv = normalized_advantages(total, cfg.std_floor);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& grp = groups[g];
    grp.rewards.assign(total.begin() + static_cast<std::ptrdiff_t>(g * cfg.group_size),
                       total.begin() + static_cast<std::ptrdiff_t>((g + 1) * cfg.group_size));
    row.adv_var_group += centered_variance(grp.rewards) / static_cast<double>(groups.size());
    if (cfg.algorithm == Algorithm::Grpo) {
      grp.advantages = normalized_advantages(grp.rewards, cfg.std_floor);
      flat_adv.insert(flat_adv.end(), grp.advantages.begin(), grp.advantages.end());
    }
    for (auto& tr : grp.trajectories) flat_traj.push_back(std::move(tr));
  }
  row.adv_var_batch = centered_variance(total);

  double s = 0.0;
  for (double v : total) s += v;
  row.mean_reward = s / static_cast<double>(total.size());
  for (std::size_t c = 0; c < ev.breakdown.names.size(); ++c) {
    const double m = *ev.breakdown.raw_mean(ev.breakdown.names[c]);
    row.components[ev.breakdown.names[c]] = m;
    row.raw_score += ev.breakdown.weights[c] * m;
  }
  std::set<std::string> formulas;
  for (const auto& c : all) formulas.insert(crystal::reduced_key(c));
  row.distinct_formulas = formulas.size();

  const std::size_t n = flat_traj.size();
  const std::size_t inner = std::max<std::size_t>(1, std::min(cfg.inner_batches, n));
  double kl = 0.0, ratio = 0.0, clip = 0.0;
  for (std::size_t b = 0; b < inner; ++b) {
    const std::size_t lo = b * n / inner, hi = (b + 1) * n / inner;
    TransitionBatch batch = flatten_transitions(flat_traj, flat_adv, lo, hi);
    Tape tape;
    LossParts parts;
    Var loss;
    if (cfg.algorithm == Algorithm::Grpo) {
      fill_reference_logprobs(batch, reference, env.sched, cfg.eta);
      loss = grpo_loss(tape, policy, policy.params(), batch, env.sched, cfg.objective, n, &parts, cfg.eta);
    } else {
      loss = reinforce_loss(tape, policy, policy.params(), batch, env.sched, n, &parts, cfg.eta);
    }
    if (!std::isfinite(loss.value().item())) {
      out.finite = false;
      return out;
    }
    const double w = static_cast<double>(hi - lo) / static_cast<double>(n);
    kl += w * parts.kl;
    ratio += w * parts.mean_ratio;
    clip += w * parts.clip_fraction;
    row.entropy = parts.entropy;
    add_into(out.grads, tape.gradient(loss, policy.params()));
  }
  row.kl = kl;
  row.mean_ratio = ratio;
  row.clip_fraction = clip;
  row.grad_norm = global_norm(out.grads);
  out.finite = std::isfinite(row.grad_norm);
  if (cfg.algorithm == Algorithm::Reinforce) {
    row.entropy = policy_entropy(env.sched, cfg.rollout_steps, policy.config().latent_dim, cfg.eta,
                                 diffusion::sigma_multiplier(policy.params()));
  }
  return out;
}

}  // namespace

RlResult train_rl(const Denoiser& pretrained, const RlEnvironment& env, const GrpoConfig& cfg,
                  const RlCallbacks& callbacks) {
  if (cfg.group_size < 3) throw std::invalid_argument("train_rl: group size must be at least 3");
  if (!(cfg.objective.clip_eps > 0.0) || cfg.patience == 0) throw std::invalid_argument("train_rl: bad config");
  const Denoiser reference = pretrained;
  RlResult res;
  ParamSet params = pretrained.params();
  if (cfg.learnable_sigma && !params.count(diffusion::kLogSigmaParam)) {
    params[diffusion::kLogSigmaParam] = Tensor::matrix(1, 1, {0.0});
  }
  res.policy = Denoiser(pretrained.config(), params);
  AdamW opt(AdamWConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay, cfg.max_grad_norm});
  ParamSet last_good = res.policy.params();
  bool recovered = false;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  res.stop_reason = "max_steps";
  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    StepOutcome outcome = run_step(res.policy, reference, env, cfg, step);
    if (!outcome.finite) {
      if (recovered) throw std::runtime_error("train_rl: non-finite loss again at step " + std::to_string(step));
      recovered = true;
      res.policy.params() = last_good;
      opt = AdamW(AdamWConfig{opt.lr() * 0.5, 0.9, 0.999, 1e-8, cfg.weight_decay, cfg.max_grad_norm});
      continue;
    }
    opt.step(res.policy.params(), outcome.grads);
    outcome.row.lr = opt.lr();
    res.log.push_back(outcome.row);
    if (callbacks.on_step) callbacks.on_step(outcome.row);
    if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
      last_good = res.policy.params();
      if (callbacks.on_checkpoint) callbacks.on_checkpoint(step, res.policy);
    }
    if (outcome.row.raw_score > best + cfg.plateau_tol) {
      best = outcome.row.raw_score;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      res.stop_reason = "plateau";
      break;
    }
  }
  return res;
}

}  // namespace crl::grpo
