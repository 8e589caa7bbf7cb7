#include "crl/eval/benchmark.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "crl/rewards/total.hpp"

namespace crl::eval {

using nk::RngStream;

GeneratedBatch generate(const Generator& gen, const SampleRequest& req) {
  if (req.n_atoms_pool.empty()) throw std::invalid_argument("generate: empty n_atoms pool");
  const std::size_t d = gen.denoiser.config().latent_dim;
  GeneratedBatch out;
  Tensor z_T({req.n, d});
  std::vector<diffusion::Condition> cond(req.n);
  for (std::size_t i = 0; i < req.n; ++i) {
    RngStream rng(req.seed, "sample", i);
    cond[i].n_atoms = req.n_atoms_pool[rng.below(req.n_atoms_pool.size())];
    cond[i].property = req.property;
    for (std::size_t k = 0; k < d; ++k) z_T.at(i, k) = rng.normal();
    out.n_atoms.push_back(cond[i].n_atoms);
  }
  out.latents = diffusion::ddim_sample(gen.denoiser, gen.sched, cond, req.n_steps, z_T, req.guidance_scale);
  out.crystals = gen.vae.decode(gen.stats.denormalize(out.latents), out.n_atoms);
  return out;
}

double BenchmarkReport::mean_bandgap_error(double target) const {
  if (samples.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : samples) s += std::abs(r.bandgap - target);
  return s / static_cast<double>(samples.size());
}

BenchmarkReport evaluate(const std::vector<Crystal>& samples, const EvalContext& ctx) {
  BenchmarkReport rep;
  rep.n = samples.size();
  const auto unique = unique_flags(samples, ctx.refs.match(), ctx.refs.index().config());
  const auto novel = novel_flags(samples, ctx.refs);
  const auto stab = metastable_flags(samples, ctx.oracle, ctx.metastable_threshold);
  const auto valid = comp_valid_flags(samples);
  const auto msun = msun_flags(unique, novel, stab.metastable);
  rep.uniqueness = fraction(unique);
  rep.novelty = fraction(novel);
  rep.metastability = fraction(stab.metastable);
  rep.comp_validity = fraction(valid);
  rep.msun = fraction(msun);
  rep.oracle_failures = stab.oracle_failures;
  rep.embeddings = rewards::structural_embeddings(ctx.vae, samples);
  const auto g = fit_moments(rep.embeddings), r = fit_moments(ctx.reference_embeddings);
  rep.covariance_regularized = g.regularized || r.regularized;
  rep.fmd = fmd(g, r);
  rep.fmd_inv = fmd_inv(rep.fmd);
  std::set<std::string> formulas;
  double gap_sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    SampleRecord rec;
    rec.id = i;
    rec.formula = crystal::reduced_key(samples[i]);
    rec.n_atoms = static_cast<int>(samples[i].size());
    rec.unique = unique[i];
    rec.novel = novel[i];
    rec.metastable = stab.metastable[i];
    rec.comp_valid = valid[i];
    rec.msun = msun[i];
    rec.e_hull = stab.e_hull[i];
    rec.bandgap = oracle::toy_bandgap(samples[i]);
    gap_sum += rec.bandgap;
    formulas.insert(rec.formula);
    rep.samples.push_back(rec);
  }
  rep.distinct_formulas = formulas.size();
  rep.mean_bandgap = samples.empty() ? 0.0 : gap_sum / static_cast<double>(samples.size());
  return rep;
}

std::string report_json(const BenchmarkReport& rep) {
  nlohmann::ordered_json j;
  j["n_samples"] = rep.n;
  j["uniqueness"] = rep.uniqueness;
  j["novelty"] = rep.novelty;
  j["comp_validity"] = rep.comp_validity;
  j["metastability"] = rep.metastability;
  j["msun"] = rep.msun;
  j["fmd"] = rep.fmd;
  j["fmd_inv"] = rep.fmd_inv;
  j["covariance_regularized"] = rep.covariance_regularized;
  j["oracle_failures"] = rep.oracle_failures;
  j["distinct_formulas"] = rep.distinct_formulas;
  j["mean_toy_bandgap"] = rep.mean_bandgap;
  return j.dump(2);
}

void write_report(const BenchmarkReport& rep, const std::filesystem::path& json_path,
                  const std::filesystem::path& csv_path) {
  std::ofstream js(json_path);
  if (!js) throw std::runtime_error("cannot write " + json_path.string());
  js << report_json(rep) << '\n';
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
  csv << "id,formula,n_atoms,unique,novel,metastable,comp_valid,msun,e_hull,toy_bandgap\n";
  csv << std::setprecision(10);
  for (const auto& r : rep.samples) {
    csv << r.id << ',' << r.formula << ',' << r.n_atoms << ',' << r.unique << ',' << r.novel << ',' << r.metastable
        << ',' << r.comp_valid << ',' << r.msun << ',' << r.e_hull << ',' << r.bandgap << '\n';
  }
}

void write_embeddings(const BenchmarkReport& rep, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::size_t d = rep.embeddings.cols();
  out << "id";
  for (std::size_t k = 0; k < d; ++k) out << ",z" << k;
  out << ",pc1,pc2,unique,novel,metastable,msun\n";
  const Tensor pcs = rep.n >= 2 ? pca_2d(rep.embeddings) : Tensor({rep.n, 2});
  out << std::setprecision(10);
  for (std::size_t i = 0; i < rep.n; ++i) {
    const auto& r = rep.samples[i];
    out << r.id;
    for (std::size_t k = 0; k < d; ++k) out << ',' << rep.embeddings.at(i, k);
    out << ',' << pcs.at(i, 0) << ',' << pcs.at(i, 1) << ',' << r.unique << ',' << r.novel << ',' << r.metastable
        << ',' << r.msun << '\n';
  }
}

}  // namespace crl::eval
