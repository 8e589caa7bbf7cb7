#include "crl/crystal/crystal.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "crl/crystal/elements.hpp"

namespace crl::crystal {

double wrap01(double x) {
  double w = x - std::floor(x);
  if (w >= 1.0) w = 0.0;  // x slightly below an integer can round up to 1
  return w;
}

double det(const Mat3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Mat3 transpose(const Mat3& m) {
  Mat3 t{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t[i][j] = m[j][i];
  return t;
}

Mat3 multiply(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

Vec3 frac_to_cart(const Vec3& f, const Mat3& l) {
  return {f[0] * l[0][0] + f[1] * l[1][0] + f[2] * l[2][0], f[0] * l[0][1] + f[1] * l[1][1] + f[2] * l[2][1],
          f[0] * l[0][2] + f[1] * l[1][2] + f[2] * l[2][2]};
}

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

namespace {
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
}  // namespace

Vec3 cell_heights(const Mat3& l) {
  const double v = std::abs(det(l));
  return {v / norm(cross(l[1], l[2])), v / norm(cross(l[0], l[2])), v / norm(cross(l[0], l[1]))};
}

void validate(const Crystal& c, std::size_t max_atoms) {
  if (c.species.empty() || c.species.size() > max_atoms) {
    throw CrystalError("crystal has " + std::to_string(c.species.size()) + " atoms; expected 1.." +
                       std::to_string(max_atoms));
  }
  if (c.frac.size() != c.species.size()) throw CrystalError("species and coordinate counts differ");
  if (!(det(c.lattice) > 0.0)) throw CrystalError("lattice determinant must be positive");
  for (int s : c.species)
    if (s < 0 || static_cast<std::size_t>(s) >= kNumElements) throw CrystalError("unknown species id");
  for (const auto& f : c.frac)
    for (double x : f)
      if (!(x >= 0.0 && x < 1.0)) throw CrystalError("fractional coordinate outside [0,1)");
  for (const auto& row : c.lattice)
    for (double x : row)
      if (!std::isfinite(x)) throw CrystalError("non-finite lattice entry");
}

bool is_valid(const Crystal& c, std::size_t max_atoms) {
  try {
    validate(c, max_atoms);
    return true;
  } catch (const CrystalError&) {
    return false;
  }
}

LatticeParameters lattice_parameters(const Mat3& l) {
  LatticeParameters p;
  for (int i = 0; i < 3; ++i) p.lengths[i] = norm(l[i]);
  auto angle = [&](int i, int j) {
    return std::acos(std::clamp(dot(l[i], l[j]) / (p.lengths[i] * p.lengths[j]), -1.0, 1.0));
  };
  p.angles = {angle(1, 2), angle(0, 2), angle(0, 1)};
  return p;
}

Mat3 lattice_from_parameters(const LatticeParameters& p) {
  const auto [a, b, c] = p.lengths;
  const double ca = std::cos(p.angles[0]), cb = std::cos(p.angles[1]), cg = std::cos(p.angles[2]);
  const double sg = std::sin(p.angles[2]);
  const double cx = c * cb;
  const double cy = c * (ca - cb * cg) / sg;
  const double cz2 = c * c - cx * cx - cy * cy;
  if (!(cz2 > 0.0)) throw CrystalError("lattice angles do not form a valid cell");
  return Mat3{Vec3{a, 0.0, 0.0}, Vec3{b * cg, b * sg, 0.0}, Vec3{cx, cy, std::sqrt(cz2)}};
}

Crystal rotated(const Crystal& c, const Mat3& rotation) {
  Crystal out = c;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += c.lattice[i][k] * rotation[j][k];
      out.lattice[i][j] = s;
    }
  return out;
}

Crystal translated(const Crystal& c, const Vec3& shift) {
  Crystal out = c;
  for (auto& f : out.frac)
    for (int k = 0; k < 3; ++k) f[k] = wrap01(f[k] + shift[k]);
  return out;
}

Crystal permuted(const Crystal& c, const std::vector<std::size_t>& order) {
  Crystal out = c;
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.species[i] = c.species.at(order[i]);
    out.frac[i] = c.frac.at(order[i]);
  }
  return out;
}

Crystal supercell(const Crystal& c, int na, int nb, int nc) {
  Crystal out;
  const int reps[3] = {na, nb, nc};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.lattice[i][j] = c.lattice[i][j] * reps[i];
  for (int x = 0; x < na; ++x)
    for (int y = 0; y < nb; ++y)
      for (int z = 0; z < nc; ++z)
        for (std::size_t k = 0; k < c.size(); ++k) {
          out.species.push_back(c.species[k]);
          out.frac.push_back({(c.frac[k][0] + x) / na, (c.frac[k][1] + y) / nb, (c.frac[k][2] + z) / nc});
        }
  return out;
}

Crystal canonical_order(const Crystal& c) {
  std::vector<std::size_t> order(c.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (c.species[a] != c.species[b]) return c.species[a] < c.species[b];
    return c.frac[a] < c.frac[b];
  });
  return permuted(c, order);
}

Mat3 rotation_from_axis_angle(const Vec3& axis, double angle) {
  const double n = norm(axis);
  const Vec3 u{axis[0] / n, axis[1] / n, axis[2] / n};
  const double cs = std::cos(angle), sn = std::sin(angle), t = 1.0 - cs;
  return Mat3{Vec3{cs + u[0] * u[0] * t, u[0] * u[1] * t - u[2] * sn, u[0] * u[2] * t + u[1] * sn},
              Vec3{u[1] * u[0] * t + u[2] * sn, cs + u[1] * u[1] * t, u[1] * u[2] * t - u[0] * sn},
              Vec3{u[2] * u[0] * t - u[1] * sn, u[2] * u[1] * t + u[0] * sn, cs + u[2] * u[2] * t}};
}

Composition::Composition(std::map<int, int> counts) : counts_(std::move(counts)) {
  for (auto it = counts_.begin(); it != counts_.end();) {
    if (it->second < 0) throw std::invalid_argument("negative element count");
    it = it->second == 0 ? counts_.erase(it) : std::next(it);
  }
}

Composition Composition::of(const Crystal& c) {
  std::map<int, int> counts;
  for (int s : c.species) ++counts[s];
  return Composition(std::move(counts));
}

int Composition::total() const {
  int n = 0;
  for (const auto& [_, k] : counts_) n += k;
  return n;
}

std::vector<int> Composition::elements() const {
  std::vector<int> out;
  for (const auto& [e, _] : counts_) out.push_back(e);
  return out;
}

double Composition::fraction(int el) const {
  auto it = counts_.find(el);
  return it == counts_.end() ? 0.0 : static_cast<double>(it->second) / total();
}

std::string Composition::formula() const {
  std::string s;
  for (const auto& [e, k] : counts_) {
    s += element(e).symbol;
    if (k != 1) s += std::to_string(k);
  }
  return s;
}

Composition reduced_formula(const Composition& c) {
  if (c.empty()) throw std::invalid_argument("reduced_formula: empty composition");
  int g = 0;
  for (const auto& [_, k] : c.counts()) g = std::gcd(g, k);
  std::map<int, int> counts;
  for (const auto& [e, k] : c.counts()) counts[e] = k / g;
  return Composition(std::move(counts));
}

Composition parse_formula(const std::string& formula) {
  std::map<int, int> counts;
  std::size_t i = 0;
  while (i < formula.size()) {
    if (!std::isupper(static_cast<unsigned char>(formula[i]))) {
      throw std::invalid_argument("malformed formula '" + formula + "'");
    }
    std::size_t j = i + 1;
    while (j < formula.size() && std::islower(static_cast<unsigned char>(formula[j]))) ++j;
    const int el = element_id_or_throw(formula.substr(i, j - i));
    std::size_t k = j;
    while (k < formula.size() && std::isdigit(static_cast<unsigned char>(formula[k]))) ++k;
    counts[el] += k > j ? std::stoi(formula.substr(j, k - j)) : 1;
    i = k;
  }
  return Composition(std::move(counts));
}

}  // namespace crl::crystal
