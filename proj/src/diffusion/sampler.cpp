#include "crl/diffusion/sampler.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace crl::diffusion {

using namespace crl::nk;

TransitionCoefs transition_coefs(const DiffusionSchedule& sched, std::size_t t, std::size_t t_prev, double eta) {
  const double ab = sched.alpha_bars.at(t), ab_prev = sched.alpha_bars.at(t_prev);
  TransitionCoefs c;
  c.sigma = transition_sigma(sched, t, t_prev, eta);
  const double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - c.sigma * c.sigma));
  c.a = std::sqrt(ab_prev / ab);
  c.b = dir - std::sqrt(ab_prev) * std::sqrt(1.0 - ab) / std::sqrt(ab);
  return c;
}

std::vector<double> LatentTrajectory::z0() const { return states.row(states.rows() - 1); }

double sigma_multiplier(const ParamSet& params) {
  const auto it = params.find(kLogSigmaParam);
  return it == params.end() ? 1.0 : std::exp(it->second.item());
}

EpsFn eps_fn(const Denoiser& model, std::optional<double> guidance) {
  return [&model, guidance](const Tensor& z, std::size_t t, const std::vector<Condition>& cond) {
    const std::vector<std::size_t> ts(z.rows(), t);
    if (!guidance) return model.predict(z, ts, cond);
    const Tensor e_cond = model.predict(z, ts, cond);
    const Tensor e_null = model.predict(z, ts, without_property(cond));
    return guided_eps(e_cond, e_null, *guidance);
  };
}

Tensor ddim_sample(const Denoiser& model, const DiffusionSchedule& sched, const std::vector<Condition>& cond,
                   std::size_t n_steps, const Tensor& z_T, std::optional<double> guidance) {
  return ddim_sample(eps_fn(model, guidance), sched, cond, n_steps, z_T);
}

Tensor ddim_sample(const EpsFn& eps_of, const DiffusionSchedule& sched, const std::vector<Condition>& cond,
                   std::size_t n_steps, const Tensor& z_T) {
  if (z_T.rows() != cond.size()) throw ShapeError("ddim_sample: one condition per row");
  const auto steps = step_subsequence(sched.T, n_steps);
  Tensor z = z_T;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const std::size_t t = steps[k], t_prev = k + 1 < steps.size() ? steps[k + 1] : 0;
    const Tensor eps = eps_of(z, t, cond);
    const TransitionCoefs c = transition_coefs(sched, t, t_prev, 0.0);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = c.a * z[i] + c.b * eps[i];
  }
  return z;
}

double gaussian_logpdf(const std::vector<double>& x, const std::vector<double>& mean, double sigma) {
  double q = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) q += (x[i] - mean[i]) * (x[i] - mean[i]);
  const double d = static_cast<double>(x.size());
  return -0.5 * q / (sigma * sigma) - 0.5 * d * std::log(2.0 * std::numbers::pi * sigma * sigma);
}

std::vector<LatentTrajectory> ancestral_sample_with_logprob(const Denoiser& model, const DiffusionSchedule& sched,
                                                            const std::vector<Condition>& cond, std::size_t n_steps,
                                                            std::vector<RngStream>& streams, double eta) {
  return ancestral_sample_with_logprob(eps_fn(model), model.config().latent_dim, sched, cond, n_steps, streams, eta,
                                       sigma_multiplier(model.params()));
}

std::vector<LatentTrajectory> ancestral_sample_with_logprob(const EpsFn& eps_of, std::size_t d,
                                                            const DiffusionSchedule& sched,
                                                            const std::vector<Condition>& cond, std::size_t n_steps,
                                                            std::vector<RngStream>& streams, double eta,
                                                            double sigma_mult) {
  const std::size_t b = cond.size();
  if (streams.size() != b) throw std::invalid_argument("ancestral_sample_with_logprob: one stream per row");
  const auto steps = step_subsequence(sched.T, n_steps);
  std::vector<LatentTrajectory> out(b);
  Tensor z({b, d});
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t k = 0; k < d; ++k) z.at(i, k) = streams[i].normal();
    out[i].cond = cond[i];
    out[i].steps = steps;
    out[i].eta = eta;
    out[i].states = Tensor::zeros({steps.size() + 1, d});
    for (std::size_t k = 0; k < d; ++k) out[i].states.at(0, k) = z.at(i, k);
  }
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const std::size_t t = steps[s], t_prev = s + 1 < steps.size() ? steps[s + 1] : 0;
    const Tensor eps = eps_of(z, t, cond);
    TransitionCoefs c = transition_coefs(sched, t, t_prev, eta);
    c.sigma *= sigma_mult;
    for (std::size_t i = 0; i < b; ++i) {
      std::vector<double> mean(d), next(d);
      for (std::size_t k = 0; k < d; ++k) {
        mean[k] = c.a * z.at(i, k) + c.b * eps.at(i, k);
        next[k] = c.sigma > 0.0 ? mean[k] + c.sigma * streams[i].normal() : mean[k];
      }
      out[i].logprobs.push_back(c.sigma > 0.0 ? gaussian_logpdf(next, mean, c.sigma) : 0.0);
      for (std::size_t k = 0; k < d; ++k) {
        z.at(i, k) = next[k];
        out[i].states.at(s + 1, k) = next[k];
      }
    }
  }
  return out;
}

double transition_logprob(const std::vector<double>& z_prev, const std::vector<double>& z_t, std::size_t t,
                          std::size_t t_prev, const Condition& cond, const Denoiser& model, const ParamSet& params,
                          const DiffusionSchedule& sched, double eta) {
  TransitionCoefs c = transition_coefs(sched, t, t_prev, eta);
  if (!(c.sigma > 0.0)) throw std::invalid_argument("transition_logprob: deterministic step has no density");
  c.sigma *= sigma_multiplier(params);
  Tape tape(false);
  const Tensor zt = Tensor::matrix(1, z_t.size(), z_t);
  const Tensor eps = model.predict(tape, params, tape.constant(zt), {t}, {cond}).value();
  std::vector<double> mean(z_t.size());
  for (std::size_t k = 0; k < z_t.size(); ++k) mean[k] = c.a * z_t[k] + c.b * eps[k];
  return gaussian_logpdf(z_prev, mean, c.sigma);
}

Var transition_logprob(Tape& tape, const Denoiser& model, const ParamSet& params, const Tensor& z_t,
                       const Tensor& z_prev, const std::vector<std::size_t>& t, const std::vector<std::size_t>& t_prev,
                       const std::vector<Condition>& cond, const DiffusionSchedule& sched, double eta) {
  const std::size_t r = z_t.rows(), d = z_t.cols();
  if (z_prev.shape() != z_t.shape() || t.size() != r || t_prev.size() != r) {
    throw ShapeError("transition_logprob: batch mismatch");
  }
  Tensor a({r, 1}), b({r, 1}), inv_var({r, 1}), norm({r, 1});
  for (std::size_t i = 0; i < r; ++i) {
    const TransitionCoefs c = transition_coefs(sched, t[i], t_prev[i], eta);
    if (!(c.sigma > 0.0)) throw std::invalid_argument("transition_logprob: deterministic step has no density");
    a.at(i, 0) = c.a;
    b.at(i, 0) = c.b;
    inv_var.at(i, 0) = 1.0 / (c.sigma * c.sigma);
    norm.at(i, 0) = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * c.sigma * c.sigma);
  }
  Var zt = tape.constant(z_t);
  Var eps = model.predict(tape, params, zt, t, cond);
  Var mean = add(mul(tape.constant(a), zt), mul(tape.constant(b), eps));
  Var q = row_sum(square(sub(tape.constant(z_prev), mean)));
  if (!params.count(kLogSigmaParam)) return add(scale(mul(q, tape.constant(inv_var)), -0.5), tape.constant(norm));
  // Learnable multiplier: variance scales by exp(2s), normalizer shifts by −d·s.
  Var s = broadcast_to(tape.param(params, kLogSigmaParam), {r, 1});
  Var scaled_q = mul(mul(q, tape.constant(inv_var)), exp(scale(s, -2.0)));
  return add(add(scale(scaled_q, -0.5), tape.constant(norm)), scale(s, -static_cast<double>(d)));
}

}  // namespace crl::diffusion
