#pragma once

#include <stdexcept>
#include <vector>

#include "crl/crystal/crystal.hpp"

namespace crl::oracle {

using crystal::Composition;
using crystal::Crystal;

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Morse-like pair potential D·(e^{-2α(r-r0)} - 2e^{-α(r-r0)}) with r0 the
// pair's bond length, tapered smoothly to zero between taper_start and cutoff.
struct EnergyConfig {
  double cutoff = 6.0;        // Å
  double taper_start = 5.0;   // Å
  double alpha = 1.5;         // 1/Å
  double depth_base = 0.12;    // eV, cation/anion pairs
  double depth_per_chi = 0.15; // eV per unit electronegativity difference
  double depth_cation = 0.08; // eV, cation/cation pairs
  double depth_anion = 0.03;   // eV, anion/anion pairs
  // Cells denser than this are rejected as collapsed (and priced as failures).
  double min_volume_per_atom = 1.0;  // Å^3
};

double pair_depth(int a, int b, const EnergyConfig& cfg = {});
double taper(double r, const EnergyConfig& cfg = {});
double pair_energy(int a, int b, double r, const EnergyConfig& cfg = {});

// Per-atom total energy, eV/atom. Throws OracleError for degenerate or
// collapsed cells.
double toy_total_energy(const Crystal& c, const EnergyConfig& cfg = {});

// Elemental reference energies: each pure element relaxed (lattice constant
// only) in the fcc structure.
class ElementTable {
 public:
  explicit ElementTable(const EnergyConfig& cfg = {});
  // Explicit reference energies; reference_crystal is unavailable.
  ElementTable(std::vector<double> mu, const EnergyConfig& cfg);
  double mu(int element) const { return mu_.at(static_cast<std::size_t>(element)); }
  const std::vector<double>& mus() const { return mu_; }
  Crystal reference_crystal(int element) const;
  const EnergyConfig& energy_config() const { return cfg_; }

 private:
  EnergyConfig cfg_;
  std::vector<double> mu_;
  std::vector<double> lattice_constant_;
};

double formation_energy(const Crystal& c, const ElementTable& table);

}  // namespace crl::oracle
