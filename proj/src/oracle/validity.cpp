#include "crl/oracle/validity.hpp"

#include <algorithm>
#include <limits>

#include "crl/crystal/elements.hpp"

namespace crl::oracle {

using namespace crl::crystal;

bool comp_validity(const Composition& comp) {
  if (comp.empty()) return false;
  if (comp.counts().size() == 1) return true;
  for (const auto& assignment : neutral_oxidation_assignments(comp.counts())) {
    double max_pos = -std::numeric_limits<double>::infinity();
    double min_neg = std::numeric_limits<double>::infinity();
    for (const auto& [el, ox] : assignment) {
      const double chi = element(el).electronegativity;
      if (ox > 0) max_pos = std::max(max_pos, chi);
      if (ox < 0) min_neg = std::min(min_neg, chi);
    }
    if (max_pos <= min_neg) return true;
  }
  return false;
}

}  // namespace crl::oracle
