#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crl/crystal/amd.hpp"
#include "crl/crystal/crystal.hpp"

namespace crl::crystal {

struct CorpusConfig {
  std::size_t variants_per_phase = 5;  // lattice variants drawn per (prototype, species) phase
  double perturbation = 0.2;           // Å, uniform half-width on lattice lengths
  double non_neutral_fraction = 0.1;   // phases drawn without the charge-neutrality filter
  AmdConfig amd{};
  MatchConfig match{};
};

struct CorpusEntry {
  Crystal crystal;
  std::string prototype;
  std::string family;  // cubic | tetragonal | orthorhombic
  std::size_t phase = 0;
  bool neutral_by_construction = true;
};

// Deterministic synthetic corpus of prototype-based structures with perturbed
// lattices; members are pairwise non-equivalent.
std::vector<CorpusEntry> gen_corpus(std::uint64_t seed, std::size_t size, const CorpusConfig& cfg = {});

std::vector<Crystal> crystals_of(const std::vector<CorpusEntry>& corpus);
std::vector<std::string> prototype_names();

}  // namespace crl::crystal
