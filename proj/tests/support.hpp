#pragma once

#include <cmath>
#include <numbers>
#include <numeric>

#include "crl/crystal/crystal.hpp"
#include "crl/crystal/elements.hpp"
#include "crl/numkit/rng.hpp"

namespace crl::testing {

inline crystal::Crystal simple_cubic(double a, int species = 0) {
  crystal::Crystal c;
  c.species = {species};
  c.lattice = {crystal::Vec3{a, 0, 0}, crystal::Vec3{0, a, 0}, crystal::Vec3{0, 0, a}};
  c.frac = {{0, 0, 0}};
  return c;
}

// Random small crystal with a skewed but well-conditioned cell.
inline crystal::Crystal random_crystal(nk::RngStream& rng, std::size_t max_atoms = 4, double min_len = 3.0) {
  crystal::Crystal c;
  const std::size_t n = 1 + rng.below(max_atoms);
  crystal::LatticeParameters p;
  for (int i = 0; i < 3; ++i) p.lengths[i] = min_len + 3.0 * rng.uniform();
  for (int i = 0; i < 3; ++i) p.angles[i] = (75.0 + 30.0 * rng.uniform()) * std::numbers::pi / 180.0;
  c.lattice = crystal::lattice_from_parameters(p);
  for (std::size_t i = 0; i < n; ++i) {
    c.species.push_back(static_cast<int>(rng.below(crystal::kNumElements)));
    c.frac.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
  }
  return c;
}

inline crystal::Crystal random_rotation_of(const crystal::Crystal& c, nk::RngStream& rng) {
  crystal::Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
  return crystal::rotated(c, crystal::rotation_from_axis_angle(axis, 2.0 * std::numbers::pi * rng.uniform()));
}

inline crystal::Crystal random_translation_of(const crystal::Crystal& c, nk::RngStream& rng) {
  return crystal::translated(c, {rng.uniform(), rng.uniform(), rng.uniform()});
}

inline crystal::Crystal reversed_atoms(const crystal::Crystal& c) {
  std::vector<std::size_t> order(c.size());
  std::iota(order.rbegin(), order.rend(), 0);
  return crystal::permuted(c, order);
}

}  // namespace crl::testing
