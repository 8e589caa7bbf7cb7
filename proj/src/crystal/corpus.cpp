#include "crl/crystal/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

#include "crl/crystal/elements.hpp"
#include "crl/numkit/rng.hpp"

namespace crl::crystal {
namespace {

enum class Role { Any, Cation, Anion };

struct Site {
  int role;
  Vec3 frac;
};

struct Prototype {
  std::string name;
  std::vector<Role> roles;
  std::vector<Site> sites;
  double weight;
  // Ideal (a, c) in Å from the species assigned to each role.
  std::function<std::pair<double, double>(const std::vector<int>&)> cell;
};

const std::vector<Prototype>& prototypes() {
  static const std::vector<Prototype> table = [] {
    const double s3 = std::sqrt(3.0);
    const double s2 = std::sqrt(2.0);
    const double u = 0.305;
    std::vector<Prototype> t;
    t.push_back({"sc", {Role::Cation}, {{0, {0, 0, 0}}}, 0.04, [](const std::vector<int>& e) {
                   const double a = bond_length(e[0], e[0]);
                   return std::pair{a, a};
                 }});
    t.push_back({"bcc", {Role::Cation}, {{0, {0, 0, 0}}, {0, {0.5, 0.5, 0.5}}}, 0.05,
                 [s3](const std::vector<int>& e) {
                   const double a = 2.0 * bond_length(e[0], e[0]) / s3;
                   return std::pair{a, a};
                 }});
    t.push_back({"fcc",
                 {Role::Cation},
                 {{0, {0, 0, 0}}, {0, {0.5, 0.5, 0}}, {0, {0.5, 0, 0.5}}, {0, {0, 0.5, 0.5}}},
                 0.06, [s2](const std::vector<int>& e) {
                   const double a = s2 * bond_length(e[0], e[0]);
                   return std::pair{a, a};
                 }});
    t.push_back({"cscl", {Role::Cation, Role::Anion}, {{0, {0, 0, 0}}, {1, {0.5, 0.5, 0.5}}}, 0.10,
                 [s3](const std::vector<int>& e) {
                   const double a = 2.0 * bond_length(e[0], e[1]) / s3;
                   return std::pair{a, a};
                 }});
    std::vector<Site> rocksalt;
    std::vector<Site> zincblende;
    const std::vector<Vec3> fcc_pts{{0, 0, 0}, {0.5, 0.5, 0}, {0.5, 0, 0.5}, {0, 0.5, 0.5}};
    for (const auto& p : fcc_pts) {
      rocksalt.push_back({0, p});
      zincblende.push_back({0, p});
    }
    for (const auto& p : fcc_pts) {
      rocksalt.push_back({1, {wrap01(p[0] + 0.5), p[1], p[2]}});
      zincblende.push_back({1, {p[0] + 0.25, p[1] + 0.25, p[2] + 0.25}});
    }
    t.push_back({"rocksalt", {Role::Cation, Role::Anion}, rocksalt, 0.15, [](const std::vector<int>& e) {
                   const double a = 2.0 * bond_length(e[0], e[1]);
                   return std::pair{a, a};
                 }});
    t.push_back({"zincblende", {Role::Cation, Role::Anion}, zincblende, 0.10,
                 [s3](const std::vector<int>& e) {
                   const double a = 4.0 * bond_length(e[0], e[1]) / s3;
                   return std::pair{a, a};
                 }});
    t.push_back({"rutile",
                 {Role::Cation, Role::Anion},
                 {{0, {0, 0, 0}},
                  {0, {0.5, 0.5, 0.5}},
                  {1, {u, u, 0}},
                  {1, {1 - u, 1 - u, 0}},
                  {1, {0.5 + u, 0.5 - u, 0.5}},
                  {1, {0.5 - u, 0.5 + u, 0.5}}},
                 0.12, [s2, u](const std::vector<int>& e) {
                   const double a = bond_length(e[0], e[1]) / (s2 * u);
                   return std::pair{a, 0.64 * a};
                 }});
    t.push_back({"perovskite",
                 {Role::Cation, Role::Cation, Role::Anion},
                 {{0, {0, 0, 0}}, {1, {0.5, 0.5, 0.5}}, {2, {0.5, 0.5, 0}}, {2, {0.5, 0, 0.5}}, {2, {0, 0.5, 0.5}}},
                 0.14, [](const std::vector<int>& e) {
                   const double a = 2.0 * bond_length(e[1], e[2]);
                   return std::pair{a, a};
                 }});
    t.push_back({"reo3",
                 {Role::Cation, Role::Anion},
                 {{0, {0, 0, 0}}, {1, {0.5, 0, 0}}, {1, {0, 0.5, 0}}, {1, {0, 0, 0.5}}},
                 0.09, [](const std::vector<int>& e) {
                   const double a = 2.0 * bond_length(e[0], e[1]);
                   return std::pair{a, a};
                 }});
    t.push_back({"cuprite",
                 {Role::Cation, Role::Anion},
                 {{1, {0, 0, 0}},
                  {1, {0.5, 0.5, 0.5}},
                  {0, {0.25, 0.25, 0.25}},
                  {0, {0.75, 0.75, 0.25}},
                  {0, {0.75, 0.25, 0.75}},
                  {0, {0.25, 0.75, 0.75}}},
                 0.15, [s3](const std::vector<int>& e) {
                   const double a = 4.0 * bond_length(e[0], e[1]) / s3;
                   return std::pair{a, a};
                 }});
    return t;
  }();
  return table;
}

std::vector<int> candidates(Role role) {
  std::vector<int> out;
  for (int id = 0; id < static_cast<int>(kNumElements); ++id) {
    const bool anion = is_anion_like(id);
    if (role == Role::Any || (role == Role::Anion) == anion) out.push_back(id);
  }
  return out;
}

std::map<int, int> counts_for(const Prototype& p, const std::vector<int>& species) {
  std::map<int, int> counts;
  for (const auto& s : p.sites) ++counts[species[s.role]];
  return counts;
}

// All role assignments with distinct elements per role, split by neutrality.
void assignments(const Prototype& p, std::vector<std::vector<int>>& neutral,
                 std::vector<std::vector<int>>& charged) {
  std::vector<std::vector<int>> pools;
  for (Role r : p.roles) pools.push_back(candidates(r));
  std::vector<int> current(p.roles.size());
  std::function<void(std::size_t)> rec = [&](std::size_t depth) {
    if (depth == p.roles.size()) {
      const auto counts = counts_for(p, current);
      if (counts.size() != p.roles.size()) return;
      if (p.roles.size() == 1 || !neutral_oxidation_assignments(counts).empty()) {
        neutral.push_back(current);
      } else {
        charged.push_back(current);
      }
      return;
    }
    for (int e : pools[depth]) {
      current[depth] = e;
      rec(depth + 1);
    }
  };
  rec(0);
}

struct Phase {
  std::size_t proto;
  std::vector<int> species;
  int family;  // 0 cubic, 1 tetragonal, 2 orthorhombic
  bool neutral;
};

const char* kFamilies[] = {"cubic", "tetragonal", "orthorhombic"};

double sym_uniform(nk::RngStream& rng, double half) { return (2.0 * rng.uniform() - 1.0) * half; }

}  // namespace

std::vector<std::string> prototype_names() {
  std::vector<std::string> out;
  for (const auto& p : prototypes()) out.push_back(p.name);
  return out;
}

std::vector<Crystal> crystals_of(const std::vector<CorpusEntry>& corpus) {
  std::vector<Crystal> out;
  out.reserve(corpus.size());
  for (const auto& e : corpus) out.push_back(e.crystal);
  return out;
}

std::vector<CorpusEntry> gen_corpus(std::uint64_t seed, std::size_t size, const CorpusConfig& cfg) {
  if (size == 0) return {};
  if (cfg.variants_per_phase == 0) throw std::invalid_argument("gen_corpus: variants_per_phase must be positive");
  const auto& protos = prototypes();
  std::vector<std::vector<std::vector<int>>> neutral(protos.size()), charged(protos.size());
  for (std::size_t i = 0; i < protos.size(); ++i) assignments(protos[i], neutral[i], charged[i]);

  double total_weight = 0.0;
  for (const auto& p : protos) total_weight += p.weight;

  nk::RngStream phase_rng(seed, "corpus.phases");
  const std::size_t n_phases = (size + cfg.variants_per_phase - 1) / cfg.variants_per_phase;
  std::vector<Phase> phases;
  std::set<std::tuple<std::size_t, std::vector<int>, int>> seen_phases;
  for (std::size_t attempt = 0; phases.size() < n_phases && attempt < 200 * n_phases; ++attempt) {
    double pick = phase_rng.uniform() * total_weight;
    std::size_t proto = 0;
    while (proto + 1 < protos.size() && pick >= protos[proto].weight) {
      pick -= protos[proto].weight;
      ++proto;
    }
    // Charged phases are spread evenly through the pool rather than drawn.
    const double k = static_cast<double>(phases.size());
    const bool charged_slot =
        std::floor((k + 1.0) * cfg.non_neutral_fraction) > std::floor(k * cfg.non_neutral_fraction);
    const bool want_charged = charged_slot && !charged[proto].empty();
    const auto& pool = want_charged ? charged[proto] : neutral[proto];
    if (pool.empty()) continue;
    const auto& species = pool[phase_rng.below(pool.size())];
    // Tetragonal-only prototypes never get a cubic variant.
    int family = static_cast<int>(phase_rng.below(3));
    if (protos[proto].name == "rutile" && family == 0) family = 1;
    if (!seen_phases.insert({proto, species, family}).second) continue;
    phases.push_back({proto, species, family, !want_charged});
  }

  nk::RngStream lattice_rng(seed, "corpus.lattices");
  std::vector<CorpusEntry> corpus;
  std::map<std::string, std::vector<std::vector<double>>> index;
  const std::size_t max_attempts = 50 * size + 100;
  for (std::size_t attempt = 0; corpus.size() < size && attempt < max_attempts; ++attempt) {
    const Phase& ph = phases[attempt % phases.size()];
    const Prototype& proto = protos[ph.proto];
    const auto [a0, c0] = proto.cell(ph.species);
    const double p = cfg.perturbation;
    double a = a0 + sym_uniform(lattice_rng, p);
    double b = a;
    double c = c0 == a0 ? a : c0 + sym_uniform(lattice_rng, p);
    if (ph.family == 1) {
      c = c0 + sym_uniform(lattice_rng, p);
      if (std::abs(c - a) < 0.05) c += 0.1;
    } else if (ph.family == 2) {
      b = a0 + sym_uniform(lattice_rng, p);
      c = c0 + sym_uniform(lattice_rng, p);
    }
    Crystal x;
    x.lattice = {Vec3{a, 0, 0}, Vec3{0, b, 0}, Vec3{0, 0, c}};
    for (const auto& s : proto.sites) {
      x.species.push_back(ph.species[s.role]);
      x.frac.push_back({wrap01(s.frac[0]), wrap01(s.frac[1]), wrap01(s.frac[2])});
    }
    x = canonical_order(x);
    const std::string key = reduced_key(x);
    auto vec = amd(x, cfg.amd);
    auto& bucket = index[key];
    const bool dup = std::any_of(bucket.begin(), bucket.end(), [&](const std::vector<double>& other) {
      return amd_chebyshev(vec, other) <= cfg.match.amd_tol;
    });
    if (dup) continue;
    bucket.push_back(std::move(vec));
    corpus.push_back({std::move(x), proto.name, kFamilies[ph.family], attempt % phases.size(), ph.neutral});
  }
  if (corpus.size() < size) throw std::runtime_error("gen_corpus: could not reach the requested size");
  return corpus;
}

}  // namespace crl::crystal
