#include "crl/diffusion/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace crl::diffusion {

DiffusionSchedule make_schedule(std::size_t T, double beta_start, double beta_end) {
  if (T < 2) throw std::invalid_argument("make_schedule: T must be >= 2");
  DiffusionSchedule s;
  s.T = T;
  s.betas.assign(T + 1, 0.0);
  s.alphas.assign(T + 1, 1.0);
  s.alpha_bars.assign(T + 1, 1.0);
  for (std::size_t t = 1; t <= T; ++t) {
    s.betas[t] = beta_start + (beta_end - beta_start) * static_cast<double>(t - 1) / static_cast<double>(T - 1);
    s.alphas[t] = 1.0 - s.betas[t];
    s.alpha_bars[t] = s.alpha_bars[t - 1] * s.alphas[t];
  }
  return s;
}

nk::Tensor q_sample(const nk::Tensor& z0, const std::vector<std::size_t>& t, const nk::Tensor& eps,
                    const DiffusionSchedule& sched) {
  if (z0.shape() != eps.shape() || t.size() != z0.rows()) throw nk::ShapeError("q_sample: shape mismatch");
  nk::Tensor out(z0.shape());
  for (std::size_t r = 0; r < z0.rows(); ++r) {
    const double ab = sched.alpha_bars.at(t[r]);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    for (std::size_t c = 0; c < z0.cols(); ++c) out.at(r, c) = a * z0.at(r, c) + b * eps.at(r, c);
  }
  return out;
}

std::vector<std::size_t> step_subsequence(std::size_t T, std::size_t n_steps) {
  if (n_steps == 0 || n_steps > T) throw std::invalid_argument("step_subsequence: need 1 <= n_steps <= T");
  std::vector<std::size_t> ts;
  for (std::size_t k = n_steps; k >= 1; --k) {
    ts.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(k) * static_cast<double>(T) /
                                                       static_cast<double>(n_steps))));
  }
  return ts;
}

double transition_sigma(const DiffusionSchedule& sched, std::size_t t, std::size_t t_prev, double eta) {
  const double ab = sched.alpha_bars.at(t), ab_prev = sched.alpha_bars.at(t_prev);
  const double var = (1.0 - ab_prev) / (1.0 - ab) * (1.0 - ab / ab_prev);
  return eta * std::sqrt(std::max(0.0, var));
}

}  // namespace crl::diffusion
