#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "crl/crystal/crystal.hpp"

namespace crl::crystal {

struct AmdConfig {
  std::size_t k = 20;  // large-scale runs use 100
  // Initial search radius multiplier over the volume-based estimate.
  double image_radius_safety = 1.5;
};

struct MatchConfig {
  double amd_tol = 0.05;  // Å, Chebyshev threshold on AMD vectors
};

inline constexpr double kMinDet = 1e-8;

// Sorted distances from `atom` to its k nearest periodic neighbours (all
// images of every atom, the atom's own non-zero images included).
std::vector<double> neighbor_distances(const Crystal& c, std::size_t atom, std::size_t k,
                                       const AmdConfig& cfg = {});

// Invokes fn(i, j, r) for every ordered pair (i, image of j) at distance
// 0 < r <= cutoff. Each unordered pair is therefore visited twice.
void for_each_pair_within(const Crystal& c, double cutoff,
                          const std::function<void(std::size_t, std::size_t, double)>& fn);

std::vector<double> amd(const Crystal& c, const AmdConfig& cfg = {});
double amd_chebyshev(const std::vector<double>& a, const std::vector<double>& b);

// Reduced formulas equal and AMD Chebyshev gap within tolerance.
bool equivalent(const Crystal& x, const Crystal& y, const MatchConfig& match = {}, const AmdConfig& cfg = {});

// Precomputed reduced-formula buckets of AMD vectors, so lookups scan only
// structures of the same formula.
class AmdIndex {
 public:
  AmdIndex() = default;
  AmdIndex(const std::vector<Crystal>& crystals, const AmdConfig& cfg);

  struct Entry {
    std::size_t id;
    std::vector<double> amd;
  };
  const std::vector<Entry>& bucket(const std::string& reduced) const;
  // Smallest Chebyshev gap to any member with the same reduced formula, or
  // +inf when the bucket is empty.
  double nearest_gap(const std::string& reduced, const std::vector<double>& amd_vec) const;
  bool contains_equivalent(const std::string& reduced, const std::vector<double>& amd_vec, double tol) const;
  std::size_t size() const { return count_; }
  const AmdConfig& config() const { return cfg_; }

 private:
  AmdConfig cfg_;
  std::map<std::string, std::vector<Entry>> buckets_;
  std::size_t count_ = 0;
};

std::string reduced_key(const Crystal& c);

}  // namespace crl::crystal
