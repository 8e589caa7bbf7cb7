#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crl/diffusion/sampler.hpp"
#include "crl/diffusion/train.hpp"
#include "crl/eval/metrics.hpp"
#include "crl/oracle/bandgap.hpp"
#include "crl/vae/vae.hpp"

namespace crl::eval {

// Everything needed to turn a denoiser into crystals.
struct Generator {
  const diffusion::Denoiser& denoiser;
  const vae::Vae& vae;
  const diffusion::LatentStats& stats;
  const diffusion::DiffusionSchedule& sched;
};

struct SampleRequest {
  std::size_t n = 512;
  std::uint64_t seed = 0;
  std::size_t n_steps = 50;
  std::vector<int> n_atoms_pool;          // empirical draws
  std::optional<double> property;         // conditioning value for guided sampling
  std::optional<double> guidance_scale;   // classifier-free guidance when set
};

struct GeneratedBatch {
  std::vector<Crystal> crystals;
  Tensor latents;  // normalized z0 rows
  std::vector<int> n_atoms;
};

// DDIM samples; row i uses z_T and n_atoms drawn from streams keyed by (seed, i).
GeneratedBatch generate(const Generator& gen, const SampleRequest& req);

// Frozen evaluation context.
struct EvalContext {
  const vae::Vae& vae;
  const oracle::StabilityOracle& oracle;
  const rewards::ReferenceIndex& refs;
  const Tensor& reference_embeddings;  // structural embeddings of the corpus
  double metastable_threshold = 0.1;
};

struct SampleRecord {
  std::size_t id = 0;
  std::string formula;
  int n_atoms = 0;
  bool unique = false, novel = false, metastable = false, comp_valid = false, msun = false;
  double e_hull = 0.0;
  double bandgap = 0.0;  // toy oracle value
};

struct BenchmarkReport {
  std::size_t n = 0;
  double uniqueness = 0.0, novelty = 0.0, comp_validity = 0.0, metastability = 0.0, msun = 0.0;
  double fmd = 0.0, fmd_inv = 0.0;
  bool covariance_regularized = false;
  std::size_t oracle_failures = 0;
  std::size_t distinct_formulas = 0;
  double mean_bandgap = 0.0;
  std::vector<SampleRecord> samples;
  Tensor embeddings;  // structural embeddings of the samples

  // Mean |bandgap − target| over the samples.
  double mean_bandgap_error(double target) const;
};

BenchmarkReport evaluate(const std::vector<Crystal>& samples, const EvalContext& ctx);

std::string report_json(const BenchmarkReport& report);
void write_report(const BenchmarkReport& report, const std::filesystem::path& json_path,
                  const std::filesystem::path& csv_path);
// id, latent dims, two PCA coordinates, flags.
void write_embeddings(const BenchmarkReport& report, const std::filesystem::path& path);

}  // namespace crl::eval
