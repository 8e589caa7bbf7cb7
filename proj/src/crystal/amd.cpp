#include "crl/crystal/amd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace crl::crystal {

namespace {

void require_lattice(const Crystal& c) {
  if (!(det(c.lattice) > kMinDet)) throw CrystalError("degenerate lattice (det <= 1e-8)");
}

// Visits every image displacement from atom i to atom j (any image) whose
// fractional offset lies in the box that covers a sphere of radius r.
template <class F>
void scan_images(const Crystal& c, std::size_t i, double radius, F&& visit) {
  const Vec3 h = cell_heights(c.lattice);
  int range[3];
  for (int a = 0; a < 3; ++a) range[a] = static_cast<int>(std::ceil(radius / h[a])) + 1;
  for (std::size_t j = 0; j < c.size(); ++j) {
    const Vec3 d{c.frac[j][0] - c.frac[i][0], c.frac[j][1] - c.frac[i][1], c.frac[j][2] - c.frac[i][2]};
    for (int n0 = -range[0]; n0 <= range[0]; ++n0)
      for (int n1 = -range[1]; n1 <= range[1]; ++n1)
        for (int n2 = -range[2]; n2 <= range[2]; ++n2) {
          if (j == i && n0 == 0 && n1 == 0 && n2 == 0) continue;
          const Vec3 f{d[0] + n0, d[1] + n1, d[2] + n2};
          visit(j, norm(frac_to_cart(f, c.lattice)));
        }
  }
}

}  // namespace

std::vector<double> neighbor_distances(const Crystal& c, std::size_t atom, std::size_t k, const AmdConfig& cfg) {
  require_lattice(c);
  if (atom >= c.size()) throw CrystalError("atom index out of range");
  if (k == 0) return {};
  // Radius at which a uniform density holds ~k points, padded by the cell diagonal scale.
  const double volume = det(c.lattice);
  const double per_atom = volume / static_cast<double>(c.size());
  double radius = cfg.image_radius_safety *
                  std::cbrt(3.0 * per_atom * static_cast<double>(k) / (4.0 * std::numbers::pi));
  std::vector<double> found;
  for (;;) {
    found.clear();
    scan_images(c, atom, radius, [&](std::size_t, double r) {
      if (r <= radius) found.push_back(r);
    });
    // Every point within `radius` has |frac offset| < radius/h + 1 on each
    // axis, so the scan is exhaustive up to radius; k hits settle the answer.
    if (found.size() >= k) break;
    radius *= 1.5;
  }
  std::partial_sort(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(k), found.end());
  found.resize(k);
  return found;
}

void for_each_pair_within(const Crystal& c, double cutoff,
                          const std::function<void(std::size_t, std::size_t, double)>& fn) {
  require_lattice(c);
  for (std::size_t i = 0; i < c.size(); ++i) {
    scan_images(c, i, cutoff, [&](std::size_t j, double r) {
      if (r <= cutoff && r > 0.0) fn(i, j, r);
    });
  }
}

std::vector<double> amd(const Crystal& c, const AmdConfig& cfg) {
  if (cfg.k < 1) throw std::invalid_argument("AmdConfig.k must be >= 1");
  std::vector<double> out(cfg.k, 0.0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto d = neighbor_distances(c, i, cfg.k, cfg);
    for (std::size_t j = 0; j < cfg.k; ++j) out[j] += d[j];
  }
  for (double& v : out) v /= static_cast<double>(c.size());
  return out;
}

double amd_chebyshev(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("amd_chebyshev: vectors differ in length");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::string reduced_key(const Crystal& c) { return reduced_formula(Composition::of(c)).formula(); }

bool equivalent(const Crystal& x, const Crystal& y, const MatchConfig& match, const AmdConfig& cfg) {
  if (reduced_key(x) != reduced_key(y)) return false;
  return amd_chebyshev(amd(x, cfg), amd(y, cfg)) <= match.amd_tol;
}

AmdIndex::AmdIndex(const std::vector<Crystal>& crystals, const AmdConfig& cfg) : cfg_(cfg) {
  for (std::size_t i = 0; i < crystals.size(); ++i) {
    buckets_[reduced_key(crystals[i])].push_back(Entry{i, amd(crystals[i], cfg)});
  }
  count_ = crystals.size();
}

const std::vector<AmdIndex::Entry>& AmdIndex::bucket(const std::string& reduced) const {
  static const std::vector<Entry> empty;
  auto it = buckets_.find(reduced);
  return it == buckets_.end() ? empty : it->second;
}

double AmdIndex::nearest_gap(const std::string& reduced, const std::vector<double>& amd_vec) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : bucket(reduced)) best = std::min(best, amd_chebyshev(amd_vec, e.amd));
  return best;
}

bool AmdIndex::contains_equivalent(const std::string& reduced, const std::vector<double>& amd_vec, double tol) const {
  for (const auto& e : bucket(reduced))
    if (amd_chebyshev(amd_vec, e.amd) <= tol) return true;
  return false;
}

}  // namespace crl::crystal
