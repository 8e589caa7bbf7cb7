#include "crl/oracle/energy.hpp"

#include <cmath>

#include "crl/crystal/amd.hpp"
#include "crl/crystal/elements.hpp"

namespace crl::oracle {

using namespace crl::crystal;

double pair_depth(int a, int b, const EnergyConfig& cfg) {
  const bool anion_a = is_anion_like(a), anion_b = is_anion_like(b);
  if (anion_a != anion_b) {
    return cfg.depth_base + cfg.depth_per_chi * std::abs(element(a).electronegativity - element(b).electronegativity);
  }
  return anion_a ? cfg.depth_anion : cfg.depth_cation;
}

double taper(double r, const EnergyConfig& cfg) {
  if (r <= cfg.taper_start) return 1.0;
  if (r >= cfg.cutoff) return 0.0;
  const double u = (r - cfg.taper_start) / (cfg.cutoff - cfg.taper_start);
  return 1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
}

double pair_energy(int a, int b, double r, const EnergyConfig& cfg) {
  if (r >= cfg.cutoff) return 0.0;
  const double e = std::exp(-cfg.alpha * (r - bond_length(a, b)));
  return pair_depth(a, b, cfg) * (e * e - 2.0 * e) * taper(r, cfg);
}

double toy_total_energy(const Crystal& c, const EnergyConfig& cfg) {
  if (c.size() == 0) throw OracleError("toy_total_energy: empty crystal");
  const double volume = det(c.lattice);
  if (!(volume > kMinDet)) throw OracleError("toy_total_energy: degenerate lattice");
  if (volume / static_cast<double>(c.size()) < cfg.min_volume_per_atom) {
    throw OracleError("toy_total_energy: collapsed cell");
  }
  double total = 0.0;
  for_each_pair_within(c, cfg.cutoff, [&](std::size_t i, std::size_t j, double r) {
    total += 0.5 * pair_energy(c.species[i], c.species[j], r, cfg);
  });
  return total / static_cast<double>(c.size());
}

namespace {

Crystal fcc(int element, double a) {
  Crystal c;
  c.species.assign(4, element);
  c.lattice = {Vec3{a, 0, 0}, Vec3{0, a, 0}, Vec3{0, 0, a}};
  c.frac = {{0, 0, 0}, {0.5, 0.5, 0}, {0.5, 0, 0.5}, {0, 0.5, 0.5}};
  return c;
}

}  // namespace

ElementTable::ElementTable(const EnergyConfig& cfg) : cfg_(cfg) {
  for (int el = 0; el < static_cast<int>(kNumElements); ++el) {
    // Golden-section search on the fcc lattice constant around the contact distance.
    const double ideal = std::sqrt(2.0) * bond_length(el, el);
    double lo = 0.85 * ideal, hi = 1.3 * ideal;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    auto f = [&](double a) { return toy_total_energy(fcc(el, a), cfg_); };
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - g * (hi - lo);
        f1 = f(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + g * (hi - lo);
        f2 = f(x2);
      }
    }
    const double a = 0.5 * (lo + hi);
    lattice_constant_.push_back(a);
    mu_.push_back(f(a));
  }
}

ElementTable::ElementTable(std::vector<double> mu, const EnergyConfig& cfg) : cfg_(cfg), mu_(std::move(mu)) {
  if (mu_.size() != kNumElements) throw std::invalid_argument("ElementTable: one reference energy per element");
}

Crystal ElementTable::reference_crystal(int element) const {
  if (lattice_constant_.empty()) throw OracleError("ElementTable: no reference geometry for explicit energies");
  return fcc(element, lattice_constant_.at(static_cast<std::size_t>(element)));
}

double formation_energy(const Crystal& c, const ElementTable& table) {
  double ref = 0.0;
  for (int s : c.species) {
    if (s < 0 || s >= static_cast<int>(kNumElements)) throw OracleError("formation_energy: unknown element");
    ref += table.mu(s);
  }
  return toy_total_energy(c, table.energy_config()) - ref / static_cast<double>(c.size());
}

}  // namespace crl::oracle
