#pragma once

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace crl::crystal {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;  // rows are the lattice vectors a, b, c

inline constexpr std::size_t kMaxAtoms = 8;

class CrystalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Crystal {
  std::vector<int> species;  // element ids
  Mat3 lattice{};            // Å
  std::vector<Vec3> frac;    // fractional coordinates in [0,1)

  std::size_t size() const { return species.size(); }
};

// Throws CrystalError when an invariant is violated (atom count, det(L) > 0,
// coordinates in [0,1), known species).
void validate(const Crystal& c, std::size_t max_atoms = kMaxAtoms);
bool is_valid(const Crystal& c, std::size_t max_atoms = kMaxAtoms);
double wrap01(double x);

double det(const Mat3& m);
Mat3 transpose(const Mat3& m);
Mat3 multiply(const Mat3& a, const Mat3& b);
Vec3 frac_to_cart(const Vec3& f, const Mat3& lattice);
double norm(const Vec3& v);
// Perpendicular distances between opposite faces of the cell.
Vec3 cell_heights(const Mat3& lattice);

struct LatticeParameters {
  Vec3 lengths;  // Å
  Vec3 angles;   // radians: alpha (b,c), beta (a,c), gamma (a,b)
};
LatticeParameters lattice_parameters(const Mat3& lattice);
// a along x, b in the xy-plane. Throws CrystalError for impossible angle sets.
Mat3 lattice_from_parameters(const LatticeParameters& p);

// Rows of `rotation` are applied as L' = L·Rᵀ (every lattice vector rotated).
Crystal rotated(const Crystal& c, const Mat3& rotation);
Crystal translated(const Crystal& c, const Vec3& shift);
Crystal permuted(const Crystal& c, const std::vector<std::size_t>& order);
Crystal supercell(const Crystal& c, int na, int nb, int nc);
// Sort atoms by (species, x, y, z); the order decoders are trained to emit.
Crystal canonical_order(const Crystal& c);
Mat3 rotation_from_axis_angle(const Vec3& axis, double angle);

class Composition {
 public:
  Composition() = default;
  explicit Composition(std::map<int, int> counts);
  static Composition of(const Crystal& c);

  const std::map<int, int>& counts() const { return counts_; }
  bool empty() const { return counts_.empty(); }
  int total() const;
  std::vector<int> elements() const;
  double fraction(int element) const;
  // Canonical string, e.g. "Li2O" (element-table order, counts of 1 omitted).
  std::string formula() const;

  friend bool operator==(const Composition&, const Composition&) = default;
  friend bool operator<(const Composition& a, const Composition& b) { return a.counts_ < b.counts_; }

 private:
  std::map<int, int> counts_;
};

// Counts divided by their GCD. Throws std::invalid_argument for an empty composition.
Composition reduced_formula(const Composition& c);
Composition parse_formula(const std::string& formula);

}  // namespace crl::crystal
