#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "crl/crystal/corpus.hpp"
#include "crl/diffusion/train.hpp"
#include "crl/grpo/trainer.hpp"
#include "crl/rewards/total.hpp"
#include "crl/vae/train.hpp"

namespace crl::cli {

// Bad config text or values; `key` is the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct CorpusSection {
  std::uint64_t seed = 7;
  std::size_t size = 512;
  crystal::CorpusConfig params;
};

struct DiffusionSection {
  std::size_t T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::size_t sample_steps = 50;
};

struct SampleSection {
  std::uint64_t seed = 7;
  std::size_t n = 512;
};

struct EvalSection {
  double metastable_threshold = 0.1;  // eV/atom
  std::size_t diversity_samples = 256;
};

struct RewardSection {
  rewards::RewardWeights weights;
  rewards::KernelConfig kernel;
  bool diversity = true;
};

struct RunConfig {
  std::uint64_t seed = 7;
  std::string out_dir = "run";
  CorpusSection corpus;
  vae::VaeConfig vae;
  vae::VaeTrainConfig vae_train;
  rewards::SurrogateConfig surrogate;
  DiffusionSection diffusion;
  diffusion::DenoiserConfig denoiser;
  diffusion::LdmTrainConfig ldm;
  diffusion::GuidanceConfig guidance;
  grpo::GrpoConfig grpo;
  RewardSection rewards;
  rewards::PropertyRewardConfig property;
  SampleSection sample;
  EvalSection eval;

  diffusion::DiffusionSchedule schedule() const;
  rewards::RewardOptions reward_options(rewards::RewardMode mode) const;
};

// Defaults with every stage seed set to `seed`.
RunConfig default_config(std::uint64_t seed = 7);

// TOML subset: [section] headers, key = value with strings, integers,
// floats and booleans, '#' comments. Stage seeds left out follow [run].seed.
// Throws ConfigError for syntax errors, unknown keys and bad values.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// Every key, with comments giving the reference value where one exists.
std::string to_toml(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

}  // namespace crl::cli
