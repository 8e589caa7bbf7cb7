#include "crl/oracle/lp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace crl::oracle {
namespace {

struct Tableau {
  std::size_t rows, cols;  // constraint rows; variable columns (rhs stored separately)
  std::vector<std::vector<double>> t;
  std::vector<double> rhs;
  std::vector<std::size_t> basis;

  void pivot(std::size_t r, std::size_t col) {
    const double p = t[r][col];
    for (double& v : t[r]) v /= p;
    rhs[r] /= p;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == r || t[i][col] == 0.0) continue;
      const double f = t[i][col];
      for (std::size_t j = 0; j < cols; ++j) t[i][j] -= f * t[r][j];
      rhs[i] -= f * rhs[r];
    }
    basis[r] = col;
  }

  // Runs the simplex on objective `cost` over columns allowed by `usable`.
  void optimize(const std::vector<double>& cost, const std::vector<bool>& usable, double tol) {
    for (int guard = 0; guard < 10000; ++guard) {
      // Reduced costs c_j - c_Bᵀ B⁻¹ A_j.
      std::size_t enter = cols;
      for (std::size_t j = 0; j < cols && enter == cols; ++j) {
        if (!usable[j]) continue;
        double rc = cost[j];
        for (std::size_t i = 0; i < rows; ++i) rc -= cost[basis[i]] * t[i][j];
        if (rc < -tol) enter = j;
      }
      if (enter == cols) return;
      std::size_t leave = rows;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < rows; ++i) {
        if (t[i][enter] > tol) {
          const double ratio = rhs[i] / t[i][enter];
          if (ratio < best - tol || (std::abs(ratio - best) <= tol && leave < rows && basis[i] < basis[leave])) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave == rows) throw std::runtime_error("solve_standard_lp: unbounded problem");
      pivot(leave, enter);
    }
    throw std::runtime_error("solve_standard_lp: iteration limit");
  }
};

}  // namespace

LpResult solve_standard_lp(const std::vector<double>& c, const std::vector<std::vector<double>>& a,
                           const std::vector<double>& b, double tol) {
  const std::size_t m = a.size(), n = c.size();
  if (b.size() != m) throw std::invalid_argument("solve_standard_lp: b size mismatch");
  for (const auto& row : a)
    if (row.size() != n) throw std::invalid_argument("solve_standard_lp: A row size mismatch");

  Tableau tab{m, n + m, std::vector<std::vector<double>>(m, std::vector<double>(n + m, 0.0)), b,
              std::vector<std::size_t>(m)};
  for (std::size_t i = 0; i < m; ++i) {
    const double sign = b[i] < 0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) tab.t[i][j] = sign * a[i][j];
    tab.rhs[i] = sign * b[i];
    tab.t[i][n + i] = 1.0;
    tab.basis[i] = n + i;
  }

  std::vector<double> phase1(n + m, 0.0);
  for (std::size_t j = n; j < n + m; ++j) phase1[j] = 1.0;
  tab.optimize(phase1, std::vector<bool>(n + m, true), tol);
  double infeasibility = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    if (tab.basis[i] >= n) infeasibility += tab.rhs[i];
  if (infeasibility > 1e-9) return {};

  // Drive zero-valued artificials out of the basis; rows that cannot pivot are redundant.
  for (std::size_t i = 0; i < m; ++i) {
    if (tab.basis[i] < n) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(tab.t[i][j]) > 1e-9) {
        tab.pivot(i, j);
        break;
      }
    }
  }

  std::vector<double> phase2(n + m, 0.0);
  for (std::size_t j = 0; j < n; ++j) phase2[j] = c[j];
  std::vector<bool> usable(n + m, false);
  for (std::size_t j = 0; j < n; ++j) usable[j] = true;
  tab.optimize(phase2, usable, tol);

  LpResult out;
  out.feasible = true;
  out.x.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (tab.basis[i] < n) out.x[tab.basis[i]] = tab.rhs[i];
  for (std::size_t j = 0; j < n; ++j) out.objective += c[j] * out.x[j];
  return out;
}

}  // namespace crl::oracle
