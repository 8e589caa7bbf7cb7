#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "crl/diffusion/train.hpp"
#include "crl/rewards/surrogate.hpp"
#include "crl/vae/vae.hpp"

namespace crl::cli {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Named-tensor archive: 8-byte magic, little-endian u64 header length, a JSON
// header {"meta": ..., "tensors": [{"name", "shape"}]}, then each tensor's
// values as little-endian float64 in header order.
struct TensorArchive {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, nk::Tensor> tensors;
};

void write_archive(const std::filesystem::path& path, const TensorArchive& archive);
// Throws CheckpointError when the file is missing, truncated or malformed.
TensorArchive read_archive(const std::filesystem::path& path);

// Everything one pipeline stage hands to the next. Later stages carry the
// earlier models forward so a single file is enough to sample or evaluate.
struct Checkpoint {
  std::string stage;  // vae | ldm | rl
  vae::Vae vae;
  std::optional<rewards::Surrogate> surrogate;
  std::optional<diffusion::Denoiser> denoiser;
  std::optional<diffusion::LatentStats> stats;
  std::size_t T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::size_t sample_steps = 50;
  std::vector<int> n_atoms_pool;  // atom counts of the training corpus
  nlohmann::json info = nlohmann::json::object();

  diffusion::DiffusionSchedule schedule() const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace crl::cli
