#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "crl/cli/checkpoint.hpp"
#include "crl/cli/config.hpp"
#include "crl/eval/benchmark.hpp"
#include "crl/grpo/trainer.hpp"

namespace crl::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kBadConfig = 2, kMissingCheckpoint = 3 };

// File layout of a run directory.
struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path corpus() const { return dir / "corpus.jsonl"; }
  std::filesystem::path hull_refs() const { return dir / "hull_refs.jsonl"; }
  std::filesystem::path vae_ckpt() const { return dir / "vae.ckpt"; }
  std::filesystem::path ldm_ckpt() const { return dir / "ldm.ckpt"; }
  std::filesystem::path rl_ckpt(const std::string& tag) const { return dir / ("rl_" + tag + ".ckpt"); }
  std::filesystem::path rl_log(const std::string& tag) const { return dir / ("rl_" + tag + ".csv"); }
  std::filesystem::path resolved_config(const std::string& command) const {
    return dir / ("config_" + command + ".toml");
  }
};

// Corpus JSON lines plus the frozen hull references built from it.
void gen_data(const RunConfig& cfg, std::ostream& log);

struct VaeStageReport {
  double recon_val = 0.0;
  double recon_train = 0.0;
  std::size_t best_step = 0;
  rewards::SurrogateReport surrogate;
};
// Trains the VAE and the bandgap surrogate on its embeddings.
VaeStageReport train_vae_stage(const RunConfig& cfg, std::ostream& log);

// Fits latent statistics and trains the denoiser; `cfg_dropout` drops the
// property with guidance.cond_dropout so the model supports guidance.
void train_ldm_stage(const RunConfig& cfg, bool cfg_dropout, std::ostream& log);

struct RlOptions {
  grpo::Algorithm algorithm = grpo::Algorithm::Grpo;
  bool diversity = true;
  bool property = false;  // bandgap-targeted rewards
  std::optional<std::string> tag;
};
std::string rl_tag(const RlOptions& opts);
grpo::RlResult rl_finetune_stage(const RunConfig& cfg, const RlOptions& opts, std::ostream& log);

struct SampleOptions {
  std::size_t n = 512;
  std::uint64_t seed = 7;
  std::optional<double> guidance_scale;
  std::optional<double> cond_bandgap;
};
eval::GeneratedBatch sample_from(const Checkpoint& ckpt, const SampleOptions& opts);

// Loads the reference corpus and checkpoint, then scores the samples.
eval::BenchmarkReport evaluate_samples(const std::vector<crystal::Crystal>& samples,
                                       const std::vector<crystal::Crystal>& corpus, const Checkpoint& ckpt,
                                       double metastable_threshold = 0.1);

// Full command line; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace crl::cli
