#pragma once

#include <vector>

namespace crl::oracle {

struct LpResult {
  bool feasible = false;
  double objective = 0.0;
  std::vector<double> x;
};

// minimize cᵀx subject to A x = b, x >= 0, by the two-phase dense simplex
// method with Bland's rule. A is given row-major, one vector per constraint.
// Problems here are bounded (convex weights), so unboundedness is an error.
LpResult solve_standard_lp(const std::vector<double>& c, const std::vector<std::vector<double>>& a,
                           const std::vector<double>& b, double tol = 1e-12);

}  // namespace crl::oracle
