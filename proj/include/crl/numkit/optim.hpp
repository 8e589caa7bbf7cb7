#pragma once

#include <map>
#include <string>

#include "crl/numkit/autodiff.hpp"

namespace crl::nk {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double max_grad_norm = 0.0;  // 0 disables global-norm clipping
};

// Adam with decoupled weight decay.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  void step(ParamSet& params, const GradMap& grads);
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  long steps() const { return t_; }

 private:
  AdamWConfig cfg_;
  std::map<std::string, Tensor> m_, v_;
  long t_ = 0;
};

double global_norm(const GradMap& grads);
void add_into(GradMap& acc, const GradMap& g, double weight = 1.0);

}  // namespace crl::nk
