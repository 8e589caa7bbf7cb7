#include "crl/numkit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace crl::nk {

EighResult eigh(const Tensor& m, const JacobiOptions& opts) {
  if (m.rank() != 2 || m.dim(0) != m.dim(1)) throw ShapeError("eigh: expected square matrix, got " + shape_str(m.shape()));
  const std::size_t n = m.dim(0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(m.at(i, j) - m.at(j, i)) > opts.symmetry_tolerance) {
        throw LinalgError("eigh: matrix is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }

  Tensor a = m;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a.at(i, j) = a.at(j, i) = 0.5 * (m.at(i, j) + m.at(j, i));
  Tensor v = Tensor::identity(n);

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += a.at(i, j) * a.at(i, j);
    return std::sqrt(2.0 * s);
  };
  const double scale = std::max(frobenius(a), 1.0);

  bool converged = off_norm() <= opts.off_tolerance * scale;
  for (int sweep = 0; sweep < opts.max_sweeps && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (apq == 0.0) continue;
        const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a.at(k, p), akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a.at(p, k), aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = off_norm() <= opts.off_tolerance * scale;
  }
  if (!converged) throw LinalgError("eigh: Jacobi iteration did not converge");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a.at(x, x) < a.at(y, y); });
  EighResult out{Tensor(Shape{n}), Tensor(Shape{n, n})};
  for (std::size_t k = 0; k < n; ++k) {
    out.eigenvalues[k] = a.at(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors.at(i, k) = v.at(i, order[k]);
  }
  return out;
}

Tensor sqrtm_psd(const Tensor& m, double neg_tolerance) {
  const EighResult e = eigh(m);
  const std::size_t n = m.dim(0);
  std::vector<double> root(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = e.eigenvalues[k];
    if (w < -neg_tolerance) throw LinalgError("sqrtm_psd: matrix is not PSD (eigenvalue " + std::to_string(w) + ")");
    root[k] = std::sqrt(std::max(w, 0.0));
  }
  Tensor out(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += e.eigenvectors.at(i, k) * root[k] * e.eigenvectors.at(j, k);
      out.at(i, j) = s;
    }
  return out;
}

}  // namespace crl::nk
