#include "crl/crystal/io.hpp"

#include <fstream>

#include <json.hpp>

#include "crl/crystal/elements.hpp"

namespace crl::crystal {
namespace {

using nlohmann::json;

json crystal_json(const Crystal& c) {
  json j;
  j["species"] = json::array();
  for (int s : c.species) j["species"].push_back(std::string(element(s).symbol));
  j["lattice"] = json::array();
  for (const auto& row : c.lattice) j["lattice"].push_back({row[0], row[1], row[2]});
  j["frac_coords"] = json::array();
  for (const auto& f : c.frac) j["frac_coords"].push_back({f[0], f[1], f[2]});
  return j;
}

Vec3 vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw CrystalError(std::string("crystal json: ") + what + " rows must have 3 entries");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Crystal parse(const json& j) {
  if (!j.is_object()) throw CrystalError("crystal json: record must be an object");
  for (const char* key : {"species", "lattice", "frac_coords"}) {
    if (!j.contains(key)) throw CrystalError(std::string("crystal json: missing key '") + key + "'");
  }
  Crystal c;
  try {
    for (const auto& s : j["species"]) {
      const auto id = element_id(s.get<std::string>());
      if (!id) throw CrystalError("crystal json: unknown species '" + s.get<std::string>() + "'");
      c.species.push_back(*id);
    }
    const auto& lat = j["lattice"];
    if (!lat.is_array() || lat.size() != 3) throw CrystalError("crystal json: lattice must be 3x3");
    for (int r = 0; r < 3; ++r) c.lattice[r] = vec3(lat[r], "lattice");
    for (const auto& f : j["frac_coords"]) c.frac.push_back(vec3(f, "frac_coords"));
  } catch (const json::exception& e) {
    throw CrystalError(std::string("crystal json: ") + e.what());
  }
  if (c.frac.size() != c.species.size()) throw CrystalError("crystal json: species and frac_coords lengths differ");
  return c;
}

}  // namespace

std::string to_json(const Crystal& c) { return crystal_json(c).dump(); }

Crystal from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CrystalError(std::string("crystal json: ") + e.what());
  }
  return parse(j);
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Crystal>& crystals) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  for (const auto& c : crystals) out << crystal_json(c).dump() << '\n';
}

std::vector<Crystal> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<Crystal> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(from_json(line));
    } catch (const CrystalError& e) {
      throw CrystalError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, const std::vector<CorpusEntry>& corpus) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& e : corpus) {
    json j = crystal_json(e.crystal);
    j["prototype"] = e.prototype;
    j["family"] = e.family;
    j["phase"] = e.phase;
    out << j.dump() << '\n';
  }
}

}  // namespace crl::crystal
