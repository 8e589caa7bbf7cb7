#include "crl/oracle/bandgap.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "crl/crystal/elements.hpp"

namespace crl::oracle {

using namespace crl::crystal;

double electronegativity_spread(const Composition& comp) {
  double s = 0.0;
  for (const auto& [a, na] : comp.counts()) {
    for (const auto& [b, nb] : comp.counts()) {
      s += comp.fraction(a) * comp.fraction(b) *
           std::abs(element(a).electronegativity - element(b).electronegativity);
    }
  }
  return s;
}

double packing_fraction(const Crystal& c) {
  double v = 0.0;
  for (int s : c.species) {
    const double r = 0.5 * element(s).size;
    v += 4.0 / 3.0 * std::numbers::pi * r * r * r;
  }
  return v / det(c.lattice);
}

double toy_bandgap(const Crystal& c, const BandgapConfig& cfg) {
  const double spread = electronegativity_spread(Composition::of(c));
  const double damped = cfg.scale * spread / (1.0 + packing_fraction(c) / cfg.packing_ref);
  return std::max(0.0, damped - cfg.offset);
}

}  // namespace crl::oracle
