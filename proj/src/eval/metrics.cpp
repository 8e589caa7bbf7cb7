#include "crl/eval/metrics.hpp"

#include <stdexcept>

#include "crl/numkit/linalg.hpp"
#include "crl/numkit/parallel.hpp"
#include "crl/oracle/validity.hpp"

namespace crl::eval {

std::vector<bool> unique_flags(const std::vector<Crystal>& samples, const crystal::MatchConfig& match,
                               const crystal::AmdConfig& amd) {
  const std::size_t n = samples.size();
  std::vector<std::string> keys(n);
  std::vector<std::vector<double>> amds(n);
  nk::parallel_for(n, [&](std::size_t i) {
    keys[i] = crystal::reduced_key(samples[i]);
    amds[i] = crystal::amd(samples[i], amd);
  });
  std::vector<char> flags(n, 1);
  nk::parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (keys[j] == keys[i] && crystal::amd_chebyshev(amds[i], amds[j]) <= match.amd_tol) {
        flags[i] = 0;
        break;
      }
    }
  });
  return {flags.begin(), flags.end()};
}

std::vector<bool> novel_flags(const std::vector<Crystal>& samples, const rewards::ReferenceIndex& refs) {
  std::vector<char> flags(samples.size());
  nk::parallel_for(samples.size(), [&](std::size_t i) { flags[i] = !refs.contains(samples[i]); });
  return {flags.begin(), flags.end()};
}

StabilityFlags metastable_flags(const std::vector<Crystal>& samples, const oracle::StabilityOracle& oracle,
                                double threshold) {
  StabilityFlags out;
  const std::size_t n = samples.size();
  out.e_hull.assign(n, std::numeric_limits<double>::infinity());
  std::vector<char> failed(n, 0);
  nk::parallel_for(n, [&](std::size_t i) {
    try {
      out.e_hull[i] = oracle.evaluate(samples[i]).e_hull;
    } catch (const oracle::OracleError&) {
      failed[i] = 1;
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    out.metastable.push_back(out.e_hull[i] < threshold);
    out.oracle_failures += failed[i];
  }
  return out;
}

std::vector<bool> comp_valid_flags(const std::vector<Crystal>& samples) {
  std::vector<bool> out;
  for (const auto& c : samples) out.push_back(oracle::comp_validity(crystal::Composition::of(c)));
  return out;
}

double fraction(const std::vector<bool>& flags) {
  if (flags.empty()) throw std::invalid_argument("fraction: empty flag vector");
  std::size_t k = 0;
  for (bool f : flags) k += f;
  return static_cast<double>(k) / static_cast<double>(flags.size());
}

double uniqueness(const std::vector<Crystal>& samples) { return fraction(unique_flags(samples)); }

double novelty(const std::vector<Crystal>& samples, const rewards::ReferenceIndex& refs) {
  return fraction(novel_flags(samples, refs));
}

std::vector<bool> msun_flags(const std::vector<bool>& unique, const std::vector<bool>& novel,
                             const std::vector<bool>& metastable) {
  if (unique.size() != novel.size() || unique.size() != metastable.size()) {
    throw std::invalid_argument("msun_flags: flag vectors differ in length");
  }
  std::vector<bool> out(unique.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = unique[i] && novel[i] && metastable[i];
  return out;
}

GaussianMoments fit_moments(const Tensor& x) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n < 2) throw std::invalid_argument("fit_moments: need at least 2 samples");
  GaussianMoments m;
  m.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) m.mean[k] += x.at(i, k) / static_cast<double>(n);
  m.cov = Tensor({d, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b)
        m.cov.at(a, b) += (x.at(i, a) - m.mean[a]) * (x.at(i, b) - m.mean[b]) / static_cast<double>(n - 1);
  if (n < d + 1) {
    for (std::size_t a = 0; a < d; ++a) m.cov.at(a, a) += 1e-6;
    m.regularized = true;
  }
  return m;
}

double fmd(const GaussianMoments& g, const GaussianMoments& r) {
  const std::size_t d = g.mean.size();
  if (r.mean.size() != d) throw std::invalid_argument("fmd: dimension mismatch");
  double mean_term = 0.0, trace = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    mean_term += (g.mean[k] - r.mean[k]) * (g.mean[k] - r.mean[k]);
    trace += g.cov.at(k, k) + r.cov.at(k, k);
  }
  const Tensor sg = nk::sqrtm_psd(g.cov, 1e-8);
  Tensor inner = nk::matmul(nk::matmul(sg, r.cov), sg);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a + 1; b < d; ++b) inner.at(a, b) = inner.at(b, a) = 0.5 * (inner.at(a, b) + inner.at(b, a));
  const Tensor root = nk::sqrtm_psd(inner, 1e-8);
  for (std::size_t k = 0; k < d; ++k) trace -= 2.0 * root.at(k, k);
  const double out = mean_term + trace;
  return out < 0.0 ? 0.0 : out;
}

double fmd(const Tensor& xg, const Tensor& xr) { return fmd(fit_moments(xg), fit_moments(xr)); }

double fmd_inv(double fmd_value) { return 1.0 / (1.0 + fmd_value); }

Tensor pca_2d(const Tensor& x) {
  const auto m = fit_moments(x);
  const auto eig = nk::eigh(m.cov);
  const std::size_t d = x.cols();
  Tensor out({x.rows(), 2});
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t p = 0; p < 2 && p < d; ++p) {
      const std::size_t col = d - 1 - p;  // eigenvalues ascend
      double v = 0.0;
      for (std::size_t k = 0; k < d; ++k) v += (x.at(i, k) - m.mean[k]) * eig.eigenvectors.at(k, col);
      out.at(i, p) = v;
    }
  }
  return out;
}

}  // namespace crl::eval
