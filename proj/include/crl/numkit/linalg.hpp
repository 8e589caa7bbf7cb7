#pragma once

#include "crl/numkit/tensor.hpp"

namespace crl::nk {

class LinalgError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EighResult {
  Tensor eigenvalues;   // (n), ascending
  Tensor eigenvectors;  // (n,n), column k pairs with eigenvalues[k]
};

struct JacobiOptions {
  int max_sweeps = 100;
  double off_tolerance = 1e-12;
  double symmetry_tolerance = 1e-10;
};

// Symmetric eigendecomposition by cyclic Jacobi rotations.
EighResult eigh(const Tensor& m, const JacobiOptions& opts = {});

// Principal square root of a symmetric PSD matrix. Eigenvalues in
// [-1e-10, 0) are clamped to zero; anything more negative is rejected.
Tensor sqrtm_psd(const Tensor& m, double neg_tolerance = 1e-10);

}  // namespace crl::nk
