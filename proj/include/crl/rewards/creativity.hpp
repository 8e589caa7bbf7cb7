#pragma once

#include <vector>

#include "crl/crystal/amd.hpp"

namespace crl::rewards {

using crystal::Crystal;

struct CreativityFlags {
  bool unique = true;  // no other batch member is equivalent
  bool novel = true;   // no reference structure is equivalent
  double min_amd_gap = 0.0;  // Å, nearest same-formula comparator; +inf when none
};

// Reference structures indexed once by reduced formula.
class ReferenceIndex {
 public:
  ReferenceIndex() = default;
  ReferenceIndex(const std::vector<Crystal>& refs, const crystal::MatchConfig& match = {},
                 const crystal::AmdConfig& amd = {});

  const crystal::AmdIndex& index() const { return index_; }
  const crystal::MatchConfig& match() const { return match_; }
  bool contains(const Crystal& c) const;

 private:
  crystal::AmdIndex index_;
  crystal::MatchConfig match_;
};

std::vector<CreativityFlags> creativity_flags(const std::vector<Crystal>& batch, const ReferenceIndex& refs);

// 1 when unique and novel, 0 when neither, otherwise the gap clipped to 1.
double creativity_value(const CreativityFlags& f);

std::vector<double> r_creativity(const std::vector<Crystal>& batch, const ReferenceIndex& refs);

}  // namespace crl::rewards
