#include "crl/rewards/total.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "crl/numkit/parallel.hpp"

namespace crl::rewards {

double r_stability(double e_hull) { return -std::clamp(e_hull, 0.0, 1.0); }

double r_bandgap(double prediction, const PropertyRewardConfig& cfg) {
  const double d = prediction - cfg.target;
  return -d * d;
}

std::vector<double> min_max_normalize(const std::vector<double>& x, double tol) {
  if (x.empty()) return {};
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const double range = *hi - *lo;
  std::vector<double> out(x.size(), 0.5);
  if (range < tol) return out;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - *lo) / range;
  out[static_cast<std::size_t>(lo - x.begin())] = 0.0;
  out[static_cast<std::size_t>(hi - x.begin())] = 1.0;
  return out;
}

std::optional<double> RewardBreakdown::raw_mean(const std::string& name) const {
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (names[c] != name) continue;
    double s = 0.0;
    for (double v : raw[c]) s += v;
    return raw[c].empty() ? 0.0 : s / static_cast<double>(raw[c].size());
  }
  return std::nullopt;
}

RewardBreakdown total_reward(const std::vector<RewardComponent>& components) {
  RewardBreakdown out;
  const std::size_t n = components.empty() ? 0 : components.front().raw.size();
  out.total.assign(n, 0.0);
  for (const auto& c : components) {
    if (c.raw.size() != n) throw std::invalid_argument("total_reward: component lengths differ");
    if (c.weight < 0.0) throw std::invalid_argument("total_reward: negative weight for " + c.name);
    out.names.push_back(c.name);
    out.weights.push_back(c.weight);
    out.raw.push_back(c.raw);
    out.normalized.push_back(min_max_normalize(c.raw));
    for (std::size_t i = 0; i < n; ++i) out.total[i] += c.weight * out.normalized.back()[i];
  }
  return out;
}

Tensor structural_embeddings(const vae::Vae& vae, const std::vector<Crystal>& crystals) {
  const auto codes = vae.encode(crystals);
  Tensor out({crystals.size(), vae.config().latent_dim});
  for (std::size_t i = 0; i < codes.size(); ++i)
    for (std::size_t k = 0; k < out.cols(); ++k) out.at(i, k) = codes[i].mu[k];
  return out;
}

Tensor compositional_embeddings(const vae::Vae& vae, const std::vector<Crystal>& crystals) {
  Tensor out({crystals.size(), vae.config().species_embed});
  nk::parallel_for(crystals.size(), [&](std::size_t i) {
    const auto e = vae.compositional_embedding(crystals[i]);
    for (std::size_t k = 0; k < e.size(); ++k) out.at(i, k) = e[k];
  });
  return out;
}

RewardModel::RewardModel(vae::Vae vae, oracle::StabilityOracle oracle, const std::vector<Crystal>& reference,
                         RewardOptions options, std::optional<Surrogate> surrogate)
    : vae_(std::move(vae)),
      oracle_(std::move(oracle)),
      refs_(reference),
      options_(options),
      surrogate_(std::move(surrogate)) {
  if (options_.mode == RewardMode::Property && !(surrogate_ && surrogate_->trained())) {
    throw std::invalid_argument("RewardModel: property mode needs a trained surrogate");
  }
  if (options_.diversity) {
    comp_ref_ = MmdReference(compositional_embeddings(vae_, reference), options_.kernel);
    if (options_.mode == RewardMode::DeNovo) {
      struct_ref_ = MmdReference(structural_embeddings(vae_, reference), options_.kernel);
    }
  }
}

RewardModel::Evaluation RewardModel::evaluate(const std::vector<Crystal>& batch) const {
  const std::size_t n = batch.size();
  Evaluation ev;
  std::vector<RewardComponent> parts;
  Tensor structural;
  const bool need_struct = options_.mode == RewardMode::Property || options_.diversity;
  if (need_struct) structural = structural_embeddings(vae_, batch);

  if (options_.mode == RewardMode::DeNovo) {
    ev.e_hull.assign(n, std::numeric_limits<double>::infinity());
    nk::parallel_for(n, [&](std::size_t i) {
      try {
        ev.e_hull[i] = oracle_.evaluate(batch[i]).e_hull;
      } catch (const oracle::OracleError&) {
      }
    });
    std::vector<double> stab(n);
    for (std::size_t i = 0; i < n; ++i) stab[i] = r_stability(ev.e_hull[i]);
    parts.push_back({"creativity", options_.weights.creativity, r_creativity(batch, refs_)});
    parts.push_back({"stability", options_.weights.stability, stab});
    if (options_.diversity) {
      parts.push_back({"comp_diversity", options_.weights.comp_diversity,
                       r_diversity_marginal(compositional_embeddings(vae_, batch), comp_ref_)});
      parts.push_back({"struct_diversity", options_.weights.struct_diversity,
                       r_diversity_marginal(structural, struct_ref_)});
    }
  } else {
    ev.bandgap_pred = surrogate_->predict(structural);
    std::vector<double> gap(n);
    for (std::size_t i = 0; i < n; ++i) gap[i] = r_bandgap(ev.bandgap_pred[i], options_.property);
    parts.push_back({"bandgap", options_.property.w_gap, gap});
    if (options_.diversity) {
      parts.push_back({"comp_diversity", options_.property.w_div,
                       r_diversity_marginal(compositional_embeddings(vae_, batch), comp_ref_)});
    }
  }
  ev.breakdown = total_reward(parts);
  return ev;
}

}  // namespace crl::rewards
