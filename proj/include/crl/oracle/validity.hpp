#pragma once

#include "crl/crystal/crystal.hpp"

namespace crl::oracle {

// Charge neutrality under some per-element oxidation-state assignment, with
// every positively charged element no more electronegative than every
// negatively charged one. Single-element compositions count as valid metals.
bool comp_validity(const crystal::Composition& comp);

}  // namespace crl::oracle
