#include "crl/numkit/optim.hpp"

#include <cmath>

namespace crl::nk {

double global_norm(const GradMap& grads) {
  double s = 0.0;
  for (const auto& [_, g] : grads)
    for (double v : g.data()) s += v * v;
  return std::sqrt(s);
}

void add_into(GradMap& acc, const GradMap& g, double weight) {
  for (const auto& [name, t] : g) {
    auto it = acc.find(name);
    if (it == acc.end()) {
      Tensor scaled = t;
      for (double& v : scaled.data()) v *= weight;
      acc.emplace(name, std::move(scaled));
      continue;
    }
    for (std::size_t i = 0; i < t.size(); ++i) it->second[i] += weight * t[i];
  }
}

void AdamW::step(ParamSet& params, const GradMap& grads) {
  ++t_;
  double clip = 1.0;
  if (cfg_.max_grad_norm > 0.0) {
    const double n = global_norm(grads);
    if (n > cfg_.max_grad_norm) clip = cfg_.max_grad_norm / n;
  }
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Tensor& g = git->second;
    auto [mit, mnew] = m_.try_emplace(name, Tensor::zeros(p.shape()));
    auto [vit, vnew] = v_.try_emplace(name, Tensor::zeros(p.shape()));
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] * clip;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p[i]);
    }
  }
}

}  // namespace crl::nk
