#pragma once

#include <cstdint>
#include <string_view>

#include "crl/numkit/tensor.hpp"

namespace crl::nk {

// Counter-based random stream keyed by (seed, purpose, index). Draw k of a
// stream is a pure function of the key and k, so streams handed to different
// workers never interact.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0);

  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double normal();
  std::uint64_t below(std::uint64_t n);  // uniform integer in [0, n)
  Tensor normal(const Shape& shape);

  // Child stream for a sub-purpose; does not consume draws from this one.
  RngStream child(std::string_view purpose, std::uint64_t index = 0) const;

  std::uint64_t key() const { return key_; }

 private:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t hash_label(std::string_view label);

}  // namespace crl::nk
