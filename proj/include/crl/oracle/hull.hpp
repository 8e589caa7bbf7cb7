#pragma once

#include <filesystem>
#include <map>
#include <vector>

#include "crl/oracle/energy.hpp"

namespace crl::oracle {

struct HullEntry {
  Composition reduced;
  double e_form;  // eV/atom
};

// Known phases defining the convex hull. Pure elements are always present at
// 0 eV/atom; each reduced composition keeps its minimum energy.
class HullReferenceSet {
 public:
  HullReferenceSet();
  explicit HullReferenceSet(const std::vector<HullEntry>& entries);

  void add(const Composition& comp, double e_form);
  const std::vector<HullEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  static HullReferenceSet from_crystals(const std::vector<Crystal>& crystals, const ElementTable& table);

  // JSON lines of {"formula": {"Li": 2, "O": 1}, "e_form": -1.23}.
  void save(const std::filesystem::path& path) const;
  static HullReferenceSet load(const std::filesystem::path& path);

 private:
  std::vector<HullEntry> entries_;
  std::map<Composition, std::size_t> index_;
};

struct StabilityResult {
  double e_form = 0.0;
  double hull_energy = 0.0;
  double e_hull = 0.0;          // max(0, e_form - hull_energy)
  bool new_hull_point = false;  // strictly below the current hull
};

// Lower-hull energy at the query's fractional composition, from the LP over
// reference entries whose elements are a subset of the query's. Throws
// OracleError when the LP is infeasible.
double hull_energy(const Composition& comp, const HullReferenceSet& refs);
StabilityResult e_hull(const Composition& comp, double e_form, const HullReferenceSet& refs);

// Frozen element table plus hull references: the full stability query for a crystal.
struct StabilityOracle {
  ElementTable table;
  HullReferenceSet refs;

  StabilityResult evaluate(const Crystal& c) const;
};

}  // namespace crl::oracle
