#include "crl/oracle/hull.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "crl/crystal/elements.hpp"
#include "crl/oracle/lp.hpp"

namespace crl::oracle {

using namespace crl::crystal;

HullReferenceSet::HullReferenceSet() {
  for (int el = 0; el < static_cast<int>(kNumElements); ++el) add(Composition(std::map<int, int>{{el, 1}}), 0.0);
}

HullReferenceSet::HullReferenceSet(const std::vector<HullEntry>& entries) : HullReferenceSet() {
  for (const auto& e : entries) add(e.reduced, e.e_form);
}

void HullReferenceSet::add(const Composition& comp, double e_form) {
  const Composition reduced = reduced_formula(comp);
  auto it = index_.find(reduced);
  if (it == index_.end()) {
    index_.emplace(reduced, entries_.size());
    entries_.push_back({reduced, e_form});
  } else {
    entries_[it->second].e_form = std::min(entries_[it->second].e_form, e_form);
  }
}

HullReferenceSet HullReferenceSet::from_crystals(const std::vector<Crystal>& crystals, const ElementTable& table) {
  HullReferenceSet refs;
  for (const auto& c : crystals) refs.add(Composition::of(c), formation_energy(c, table));
  return refs;
}

void HullReferenceSet::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& e : entries_) {
    nlohmann::json formula = nlohmann::json::object();
    for (const auto& [el, n] : e.reduced.counts()) formula[std::string(element(el).symbol)] = n;
    out << nlohmann::json{{"formula", formula}, {"e_form", e.e_form}}.dump() << '\n';
  }
}

HullReferenceSet HullReferenceSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  HullReferenceSet refs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line);
    std::map<int, int> counts;
    for (const auto& [sym, n] : j.at("formula").items()) counts[element_id_or_throw(sym)] = n.get<int>();
    refs.add(Composition(counts), j.at("e_form").get<double>());
  }
  return refs;
}

double hull_energy(const Composition& comp, const HullReferenceSet& refs) {
  if (comp.empty()) throw OracleError("hull_energy: empty composition");
  const std::vector<int> elements = comp.elements();
  std::vector<double> cost;
  std::vector<std::vector<double>> columns;
  for (const auto& e : refs.entries()) {
    const bool subset = std::all_of(e.reduced.counts().begin(), e.reduced.counts().end(),
                                    [&](const auto& kv) { return comp.counts().count(kv.first) > 0; });
    if (!subset) continue;
    std::vector<double> col;
    for (int el : elements) col.push_back(e.reduced.fraction(el));
    columns.push_back(std::move(col));
    cost.push_back(e.e_form);
  }
  std::vector<std::vector<double>> a(elements.size(), std::vector<double>(columns.size()));
  std::vector<double> b;
  for (std::size_t r = 0; r < elements.size(); ++r) {
    for (std::size_t j = 0; j < columns.size(); ++j) a[r][j] = columns[j][r];
    b.push_back(comp.fraction(elements[r]));
  }
  const LpResult res = solve_standard_lp(cost, a, b);
  if (!res.feasible) throw OracleError("hull_energy: infeasible (missing elemental references)");
  return res.objective;
}

StabilityResult e_hull(const Composition& comp, double e_form, const HullReferenceSet& refs) {
  StabilityResult r;
  r.e_form = e_form;
  r.hull_energy = hull_energy(comp, refs);
  const double excess = e_form - r.hull_energy;
  r.e_hull = std::max(0.0, excess);
  r.new_hull_point = excess < -1e-12;
  return r;
}

StabilityResult StabilityOracle::evaluate(const Crystal& c) const {
  return e_hull(Composition::of(c), formation_energy(c, table), refs);
}

}  // namespace crl::oracle
