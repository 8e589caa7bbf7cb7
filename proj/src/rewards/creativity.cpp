#include "crl/rewards/creativity.hpp"

#include <algorithm>
#include <limits>

#include "crl/numkit/parallel.hpp"

namespace crl::rewards {

ReferenceIndex::ReferenceIndex(const std::vector<Crystal>& refs, const crystal::MatchConfig& match,
                               const crystal::AmdConfig& amd)
    : index_(refs, amd), match_(match) {}

bool ReferenceIndex::contains(const Crystal& c) const {
  return index_.contains_equivalent(crystal::reduced_key(c), crystal::amd(c, index_.config()), match_.amd_tol);
}

std::vector<CreativityFlags> creativity_flags(const std::vector<Crystal>& batch, const ReferenceIndex& refs) {
  const std::size_t n = batch.size();
  std::vector<std::string> keys(n);
  std::vector<std::vector<double>> amds(n);
  nk::parallel_for(n, [&](std::size_t i) {
    keys[i] = crystal::reduced_key(batch[i]);
    amds[i] = crystal::amd(batch[i], refs.index().config());
  });
  std::vector<CreativityFlags> out(n);
  nk::parallel_for(n, [&](std::size_t i) {
    CreativityFlags& f = out[i];
    const double ref_gap = refs.index().nearest_gap(keys[i], amds[i]);
    double batch_gap = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || keys[j] != keys[i]) continue;
      batch_gap = std::min(batch_gap, crystal::amd_chebyshev(amds[i], amds[j]));
    }
    f.novel = !(ref_gap <= refs.match().amd_tol);
    f.unique = !(batch_gap <= refs.match().amd_tol);
    f.min_amd_gap = std::min(ref_gap, batch_gap);
  });
  return out;
}

double creativity_value(const CreativityFlags& f) {
  if (f.unique && f.novel) return 1.0;
  if (!f.unique && !f.novel) return 0.0;
  return std::min(f.min_amd_gap, 1.0);
}

std::vector<double> r_creativity(const std::vector<Crystal>& batch, const ReferenceIndex& refs) {
  const auto flags = creativity_flags(batch, refs);
  std::vector<double> out(flags.size());
  std::transform(flags.begin(), flags.end(), out.begin(), creativity_value);
  return out;
}

}  // namespace crl::rewards
