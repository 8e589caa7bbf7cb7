#include "crl/crystal/elements.hpp"

#include <stdexcept>

namespace crl::crystal {

const std::vector<ElementData>& element_table() {
  static const std::vector<ElementData> table = {
      {"Li", 0.98, {1}, 0.76},        {"Na", 0.93, {1}, 1.02},     {"K", 0.82, {1}, 1.38},
      {"Mg", 1.31, {2}, 0.72},        {"Ca", 1.00, {2}, 1.00},     {"Ti", 1.54, {2, 3, 4}, 0.61},
      {"Fe", 1.83, {2, 3}, 0.65},     {"Cu", 1.90, {1, 2}, 0.73},  {"O", 3.44, {-2}, 1.40},
      {"S", 2.58, {-2}, 1.84},        {"Cl", 3.16, {-1}, 1.81},    {"F", 3.98, {-1}, 1.33},
  };
  return table;
}

const ElementData& element(int id) {
  const auto& t = element_table();
  if (id < 0 || static_cast<std::size_t>(id) >= t.size()) {
    throw std::out_of_range("unknown element id " + std::to_string(id));
  }
  return t[static_cast<std::size_t>(id)];
}

std::optional<int> element_id(std::string_view symbol) {
  const auto& t = element_table();
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i].symbol == symbol) return static_cast<int>(i);
  return std::nullopt;
}

int element_id_or_throw(std::string_view symbol) {
  if (auto id = element_id(symbol)) return *id;
  throw std::invalid_argument("unknown element symbol '" + std::string(symbol) + "'");
}

bool is_anion_like(int id) { return element(id).oxidation_states.front() < 0; }

std::vector<std::map<int, int>> neutral_oxidation_assignments(const std::map<int, int>& counts) {
  std::vector<std::pair<int, int>> items(counts.begin(), counts.end());
  std::vector<std::map<int, int>> found;
  std::map<int, int> current;
  auto recurse = [&](auto&& self, std::size_t k, long charge) -> void {
    if (k == items.size()) {
      if (charge == 0) found.push_back(current);
      return;
    }
    const auto [el, n] = items[k];
    for (int ox : element(el).oxidation_states) {
      current[el] = ox;
      self(self, k + 1, charge + static_cast<long>(ox) * n);
    }
    current.erase(el);
  };
  recurse(recurse, 0, 0);
  return found;
}

}  // namespace crl::crystal

namespace crl::crystal {

double bond_length(int a, int b) {
  const double s = element(a).size + element(b).size;
  return !is_anion_like(a) && !is_anion_like(b) ? kMetallicFactor * s : s;
}

}  // namespace crl::crystal
