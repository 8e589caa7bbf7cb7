#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "crl/crystal/corpus.hpp"
#include "crl/crystal/crystal.hpp"

namespace crl::crystal {

// {"species": [...], "lattice": [[...]], "frac_coords": [[...]]}
std::string to_json(const Crystal& c);
// Throws CrystalError on malformed records or unknown species.
Crystal from_json(const std::string& text);

void write_jsonl(const std::filesystem::path& path, const std::vector<Crystal>& crystals);
std::vector<Crystal> read_jsonl(const std::filesystem::path& path);

// Corpus lines carry the crystal keys plus "prototype", "family" and "phase".
void write_corpus(const std::filesystem::path& path, const std::vector<CorpusEntry>& corpus);

}  // namespace crl::crystal
