#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crl/oracle/hull.hpp"
#include "crl/rewards/creativity.hpp"
#include "crl/rewards/mmd.hpp"
#include "crl/rewards/surrogate.hpp"
#include "crl/vae/vae.hpp"

namespace crl::rewards {

struct RewardWeights {
  double creativity = 1.0;
  double stability = 1.0;
  double comp_diversity = 1.0;
  double struct_diversity = 0.1;
};

struct PropertyRewardConfig {
  double target = 3.0;  // eV
  double w_gap = 1.0;
  double w_div = 0.5;
};

// −clip(e_hull, 0, 1).
double r_stability(double e_hull);
// −(prediction − target)².
double r_bandgap(double prediction, const PropertyRewardConfig& cfg);

// (x − min)/(max − min), or 0.5 everywhere when the range is below tol.
std::vector<double> min_max_normalize(const std::vector<double>& x, double tol = 1e-12);

struct RewardComponent {
  std::string name;
  double weight = 0.0;
  std::vector<double> raw;
};

struct RewardBreakdown {
  std::vector<std::string> names;
  std::vector<double> weights;
  std::vector<std::vector<double>> raw;         // [component][sample]
  std::vector<std::vector<double>> normalized;  // [component][sample]
  std::vector<double> total;                    // [sample]

  std::size_t size() const { return total.size(); }
  // Batch mean of a raw component, or nullopt when absent.
  std::optional<double> raw_mean(const std::string& name) const;
};

// Min-max normalizes each component over the batch and forms the weighted sum.
RewardBreakdown total_reward(const std::vector<RewardComponent>& components);

enum class RewardMode { DeNovo, Property };

struct RewardOptions {
  RewardMode mode = RewardMode::DeNovo;
  RewardWeights weights;
  PropertyRewardConfig property;
  KernelConfig kernel;
  bool diversity = true;  // false drops both diversity terms
};

// Frozen context for scoring batches of generated crystals: VAE embeddings,
// reference corpus, stability oracle and optional bandgap surrogate.
class RewardModel {
 public:
  RewardModel(vae::Vae vae, oracle::StabilityOracle oracle, const std::vector<Crystal>& reference,
              RewardOptions options, std::optional<Surrogate> surrogate = std::nullopt);

  struct Evaluation {
    RewardBreakdown breakdown;
    std::vector<double> e_hull;  // +inf where the oracle rejects the cell
    std::vector<double> bandgap_pred;
  };

  // Needs at least 3 crystals when diversity terms are enabled.
  Evaluation evaluate(const std::vector<Crystal>& batch) const;

  const RewardOptions& options() const { return options_; }
  const vae::Vae& vae() const { return vae_; }
  const ReferenceIndex& reference() const { return refs_; }

 private:
  vae::Vae vae_;
  oracle::StabilityOracle oracle_;
  ReferenceIndex refs_;
  RewardOptions options_;
  std::optional<Surrogate> surrogate_;
  MmdReference struct_ref_, comp_ref_;
};

// Encoder means of each crystal, one row per crystal.
Tensor structural_embeddings(const vae::Vae& vae, const std::vector<Crystal>& crystals);
Tensor compositional_embeddings(const vae::Vae& vae, const std::vector<Crystal>& crystals);

}  // namespace crl::rewards
