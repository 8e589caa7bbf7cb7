#pragma once

#include "crl/crystal/crystal.hpp"

namespace crl::oracle {

struct BandgapConfig {
  double scale = 5.0;    // eV per unit electronegativity spread
  double offset = 1.2;   // eV subtracted before flooring at 0
  double packing_ref = 0.35;
};

// Composition-weighted mean |Δχ| over atom pairs.
double electronegativity_spread(const crystal::Composition& comp);
// Sum of atomic sphere volumes (radius = size/2) over the cell volume.
double packing_fraction(const crystal::Crystal& c);
// scale·spread / (1 + packing/packing_ref) − offset, floored at 0. eV.
double toy_bandgap(const crystal::Crystal& c, const BandgapConfig& cfg = {});

}  // namespace crl::oracle
