#include "crl/rewards/mmd.hpp"

#include <cmath>
#include <stdexcept>

#include "crl/numkit/parallel.hpp"

namespace crl::rewards {

double poly_kernel(const double* x, const double* y, std::size_t d, const KernelConfig& k) {
  double dot = k.offset;
  for (std::size_t i = 0; i < d; ++i) dot += x[i] * y[i];
  double out = 1.0;
  for (int p = 0; p < k.degree; ++p) out *= dot;
  return out;
}

namespace {

const double* row_ptr(const Tensor& x, std::size_t i) { return x.data().data() + i * x.cols(); }

double offdiag_sum(const Tensor& x, const KernelConfig& k) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> rows(n, 0.0);
  nk::parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) rows[i] += poly_kernel(row_ptr(x, i), row_ptr(x, j), d, k);
  });
  double s = 0.0;
  for (double r : rows) s += 2.0 * r;
  return s;
}

void check_dims(const Tensor& xg, const Tensor& xr) {
  if (xg.cols() != xr.cols()) throw std::invalid_argument("mmd: embedding widths differ");
}

}  // namespace

double mmd_mixed(const Tensor& xg, const Tensor& xr, const KernelConfig& k) {
  return MmdReference(xr, k).mmd(xg);
}

MmdReference::MmdReference(Tensor xr, const KernelConfig& k) : xr_(std::move(xr)), k_(k) {
  const double n = static_cast<double>(xr_.rows());
  if (xr_.rows() < 2) throw std::invalid_argument("mmd: reference set needs at least 2 rows");
  self_term_ = offdiag_sum(xr_, k_) / (n * (n - 1.0));
}

std::vector<double> MmdReference::cross_sums(const Tensor& x) const {
  check_dims(x, xr_);
  std::vector<double> out(x.rows(), 0.0);
  nk::parallel_for(x.rows(), [&](std::size_t i) {
    for (std::size_t j = 0; j < xr_.rows(); ++j) out[i] += poly_kernel(row_ptr(x, i), row_ptr(xr_, j), x.cols(), k_);
  });
  return out;
}

double MmdReference::mmd(const Tensor& xg) const {
  const double m = static_cast<double>(xg.rows()), n = static_cast<double>(xr_.rows());
  if (xg.rows() < 2) throw std::invalid_argument("mmd: generated set needs at least 2 rows");
  double cross = 0.0;
  for (double c : cross_sums(xg)) cross += c;
  return -offdiag_sum(xg, k_) / (m * (m - 1.0)) - self_term_ + 2.0 * cross / (m * n);
}

std::vector<double> r_diversity_marginal(const Tensor& xg, const MmdReference& ref) {
  const std::size_t m = xg.rows(), d = xg.cols();
  if (m < 3) throw std::invalid_argument("r_diversity_marginal: needs at least 3 generated rows");
  const double md = static_cast<double>(m), n = static_cast<double>(ref.rows().rows());
  std::vector<double> gram_rows(m, 0.0);
  nk::parallel_for(m, [&](std::size_t i) {
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) gram_rows[i] += poly_kernel(row_ptr(xg, i), row_ptr(xg, j), d, ref.kernel());
  });
  const std::vector<double> cross = ref.cross_sums(xg);
  double s_gg = 0.0, s_cross = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    s_gg += gram_rows[i];
    s_cross += cross[i];
  }
  const double full = -s_gg / (md * (md - 1.0)) + 2.0 * s_cross / (md * n);
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double loo = -(s_gg - 2.0 * gram_rows[i]) / ((md - 1.0) * (md - 2.0)) +
                       2.0 * (s_cross - cross[i]) / ((md - 1.0) * n);
    out[i] = full - loo;
  }
  return out;
}

std::vector<double> r_diversity_marginal_naive(const Tensor& xg, const Tensor& xr, const KernelConfig& k) {
  const std::size_t m = xg.rows(), d = xg.cols();
  if (m < 3) throw std::invalid_argument("r_diversity_marginal: needs at least 3 generated rows");
  const double full = mmd_mixed(xg, xr, k);
  std::vector<double> out(m);
  for (std::size_t drop = 0; drop < m; ++drop) {
    Tensor rest({m - 1, d});
    for (std::size_t i = 0, r = 0; i < m; ++i) {
      if (i == drop) continue;
      for (std::size_t c = 0; c < d; ++c) rest.at(r, c) = xg.at(i, c);
      ++r;
    }
    out[drop] = full - mmd_mixed(rest, xr, k);
  }
  return out;
}

}  // namespace crl::rewards
