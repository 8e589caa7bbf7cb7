#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace crl::crystal {

struct ElementData {
  std::string_view symbol;
  double electronegativity;  // Pauling-like
  std::vector<int> oxidation_states;
  double size;  // ionic-radius-like size parameter, Å
};

inline constexpr std::size_t kNumElements = 12;

// The fixed toy element set: Li Na K Mg Ca Ti Fe Cu O S Cl F. Indices into
// this table are the species ids used everywhere else.
const std::vector<ElementData>& element_table();
const ElementData& element(int id);
std::optional<int> element_id(std::string_view symbol);
int element_id_or_throw(std::string_view symbol);
bool is_anion_like(int id);

// Every assignment of one oxidation state per element (shared by all atoms of
// that element) whose total charge over `counts` is zero.
std::vector<std::map<int, int>> neutral_oxidation_assignments(const std::map<int, int>& counts);

}  // namespace crl::crystal

namespace crl::crystal {

// Ideal contact distance for a pair: the size sum, scaled up for cation/cation
// (metallic) contacts. Shared by the corpus prototypes and the toy energy.
inline constexpr double kMetallicFactor = 1.5;
double bond_length(int a, int b);

}  // namespace crl::crystal
