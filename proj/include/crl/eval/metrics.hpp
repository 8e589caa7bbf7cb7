#pragma once

#include <vector>

#include "crl/numkit/tensor.hpp"
#include "crl/oracle/hull.hpp"
#include "crl/rewards/creativity.hpp"

namespace crl::eval {

using crystal::Crystal;
using nk::Tensor;

// True for the first member of each equivalence class, in batch order.
std::vector<bool> unique_flags(const std::vector<Crystal>& samples, const crystal::MatchConfig& match = {},
                               const crystal::AmdConfig& amd = {});
std::vector<bool> novel_flags(const std::vector<Crystal>& samples, const rewards::ReferenceIndex& refs);

struct StabilityFlags {
  std::vector<double> e_hull;  // +inf where the oracle rejects the cell
  std::vector<bool> metastable;
  std::size_t oracle_failures = 0;
};

// e_hull < threshold (strict).
StabilityFlags metastable_flags(const std::vector<Crystal>& samples, const oracle::StabilityOracle& oracle,
                                double threshold = 0.1);
std::vector<bool> comp_valid_flags(const std::vector<Crystal>& samples);

double fraction(const std::vector<bool>& flags);
double uniqueness(const std::vector<Crystal>& samples);
double novelty(const std::vector<Crystal>& samples, const rewards::ReferenceIndex& refs);
// Per-sample conjunction of the three flag vectors.
std::vector<bool> msun_flags(const std::vector<bool>& unique, const std::vector<bool>& novel,
                             const std::vector<bool>& metastable);

struct GaussianMoments {
  std::vector<double> mean;
  Tensor cov;
  bool regularized = false;  // +1e-6·I added for a marginal sample count
};

// Sample mean and unbiased covariance of the rows. Throws for fewer than 2 rows.
GaussianMoments fit_moments(const Tensor& x);

// ‖μ_g − μ_r‖² + Tr(Σ_g + Σ_r − 2(Σ_g^½ Σ_r Σ_g^½)^½), clamped at 0.
double fmd(const GaussianMoments& g, const GaussianMoments& r);
double fmd(const Tensor& xg, const Tensor& xr);
double fmd_inv(double fmd_value);

// Projection of centered rows onto the two leading principal axes.
Tensor pca_2d(const Tensor& x);

}  // namespace crl::eval
