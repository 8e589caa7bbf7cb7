#pragma once

#include <vector>

#include "crl/numkit/tensor.hpp"

namespace crl::rewards {

using nk::Tensor;

// Polynomial kernel (xᵀy + offset)^degree.
struct KernelConfig {
  int degree = 3;
  double offset = 1.0;
};

double poly_kernel(const double* x, const double* y, std::size_t d, const KernelConfig& k);

// Negative unbiased mixed MMD between generated rows Xg and reference rows Xr.
// Throws std::invalid_argument when either set has fewer than 2 rows.
double mmd_mixed(const Tensor& xg, const Tensor& xr, const KernelConfig& k = {});

// Reference-side quantities shared by every query against the same set.
class MmdReference {
 public:
  MmdReference() = default;
  MmdReference(Tensor xr, const KernelConfig& k = {});

  const Tensor& rows() const { return xr_; }
  const KernelConfig& kernel() const { return k_; }
  // Mean off-diagonal kernel value within the reference set.
  double self_term() const { return self_term_; }
  // Σ_j K(x, r_j) for each row x of `x`.
  std::vector<double> cross_sums(const Tensor& x) const;
  double mmd(const Tensor& xg) const;

 private:
  Tensor xr_;
  KernelConfig k_;
  double self_term_ = 0.0;
};

// r(Xg) − r(Xg without row m) for every m, from one Gram matrix and its row
// sums. Throws std::invalid_argument when Xg has fewer than 3 rows.
std::vector<double> r_diversity_marginal(const Tensor& xg, const MmdReference& ref);
// Same quantity by recomputing the statistic for every leave-one-out set.
std::vector<double> r_diversity_marginal_naive(const Tensor& xg, const Tensor& xr, const KernelConfig& k = {});

}  // namespace crl::rewards
