#include "crl/cli/commands.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "crl/crystal/io.hpp"
#include "crl/numkit/parallel.hpp"
#include "crl/oracle/bandgap.hpp"
#include "crl/rewards/total.hpp"

namespace crl::cli {

using nlohmann::json;
using nk::Tensor;

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::vector<crystal::Crystal> load_crystals(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("missing " + path.string() + " (run gen-data first)");
  return crystal::read_jsonl(path);
}

std::vector<int> atom_counts(const std::vector<crystal::Crystal>& crystals) {
  std::vector<int> out;
  out.reserve(crystals.size());
  for (const auto& c : crystals) out.push_back(static_cast<int>(c.size()));
  return out;
}

std::vector<double> bandgaps(const std::vector<crystal::Crystal>& crystals) {
  std::vector<double> out(crystals.size());
  nk::parallel_for(crystals.size(), [&](std::size_t i) { out[i] = oracle::toy_bandgap(crystals[i]); });
  return out;
}

std::vector<crystal::Crystal> subset(const std::vector<crystal::Crystal>& all, const std::vector<std::size_t>& idx) {
  std::vector<crystal::Crystal> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(all[i]);
  return out;
}

Checkpoint require_checkpoint(const std::filesystem::path& path, bool needs_denoiser) {
  Checkpoint c = load_checkpoint(path);
  if (needs_denoiser && (!c.denoiser || !c.stats))
    throw CheckpointError(path.string() + " holds no denoiser (run train-ldm first)");
  return c;
}

}  // namespace

void gen_data(const RunConfig& cfg, std::ostream& log) {
  const RunPaths paths{cfg.out_dir};
  std::filesystem::create_directories(paths.dir);
  const auto corpus = crystal::gen_corpus(cfg.corpus.seed, cfg.corpus.size, cfg.corpus.params);
  crystal::write_corpus(paths.corpus(), corpus);
  const oracle::ElementTable table;
  oracle::HullReferenceSet::from_crystals(crystal::crystals_of(corpus), table).save(paths.hull_refs());
  save_config(cfg, paths.resolved_config("gen-data"));
  log << "wrote " << corpus.size() << " crystals to " << paths.corpus().string() << "\n";
}

VaeStageReport train_vae_stage(const RunConfig& cfg, std::ostream& log) {
  const RunPaths paths{cfg.out_dir};
  const auto corpus = load_crystals(paths.corpus());
  save_config(cfg, paths.resolved_config("train-vae"));

  auto csv = open_out(paths.dir / "vae_log.csv");
  csv << "step,species,lengths,angles,coords,kl,total,val_total\n";
  auto res = vae::train_vae(corpus, cfg.vae, cfg.vae_train, [&](const vae::VaeLogRow& r) {
    csv << r.step << ',' << r.train.species << ',' << r.train.lengths << ',' << r.train.angles << ','
        << r.train.coords << ',' << r.train.kl << ',' << r.train.total << ',' << r.val_total << '\n'
        << std::flush;
  });

  VaeStageReport rep;
  rep.best_step = res.best_step;
  rep.recon_val = vae::reconstruction_rate(res.model, subset(corpus, res.val_idx), cfg.corpus.params.match,
                                           cfg.corpus.params.amd);
  rep.recon_train = vae::reconstruction_rate(res.model, subset(corpus, res.train_idx), cfg.corpus.params.match,
                                             cfg.corpus.params.amd);
  log << "vae: best step " << rep.best_step << ", held-out reconstruction " << rep.recon_val << "\n";

  const auto sur = rewards::train_surrogate(rewards::structural_embeddings(res.model, corpus), bandgaps(corpus),
                                            cfg.surrogate);
  rep.surrogate = sur.report;
  log << "surrogate: val MAE " << sur.report.val_mae << " eV vs mean predictor " << sur.report.baseline_mae << "\n";

  Checkpoint ckpt;
  ckpt.stage = "vae";
  ckpt.vae = std::move(res.model);
  ckpt.surrogate = sur.model;
  ckpt.T = cfg.diffusion.T;
  ckpt.beta_start = cfg.diffusion.beta_start;
  ckpt.beta_end = cfg.diffusion.beta_end;
  ckpt.sample_steps = cfg.diffusion.sample_steps;
  ckpt.n_atoms_pool = atom_counts(corpus);
  ckpt.info = {{"recon_val", rep.recon_val},
               {"recon_train", rep.recon_train},
               {"best_step", rep.best_step},
               {"surrogate_val_mae", rep.surrogate.val_mae},
               {"surrogate_baseline_mae", rep.surrogate.baseline_mae}};
  save_checkpoint(paths.vae_ckpt(), ckpt);
  open_out(paths.dir / "vae_report.json") << ckpt.info.dump(2) << "\n";
  return rep;
}

void train_ldm_stage(const RunConfig& cfg, bool cfg_dropout, std::ostream& log) {
  const RunPaths paths{cfg.out_dir};
  Checkpoint ckpt = require_checkpoint(paths.vae_ckpt(), false);
  const auto corpus = load_crystals(paths.corpus());
  save_config(cfg, paths.resolved_config("train-ldm"));

  const Tensor z = rewards::structural_embeddings(ckpt.vae, corpus);
  const auto stats = diffusion::fit_latent_stats(z);
  diffusion::LatentDataset data{stats.normalize(z), {}};
  const auto gaps = bandgaps(corpus);
  for (std::size_t i = 0; i < corpus.size(); ++i)
    data.cond.push_back({static_cast<int>(corpus[i].size()), gaps[i]});

  auto ldm_cfg = cfg.ldm;
  ldm_cfg.cond_dropout = cfg_dropout ? cfg.guidance.cond_dropout : 0.0;
  auto den_cfg = cfg.denoiser;
  den_cfg.latent_dim = ckpt.vae.config().latent_dim;
  den_cfg.max_atoms = ckpt.vae.config().max_atoms;

  auto csv = open_out(paths.dir / "ldm_log.csv");
  csv << "step,loss\n";
  auto res = diffusion::train_ldm(data, den_cfg, ldm_cfg, ckpt.schedule(), [&](const diffusion::LdmLogRow& r) {
    csv << r.step << ',' << r.loss << '\n' << std::flush;
  });
  log << "ldm: final loss " << (res.log.empty() ? 0.0 : res.log.back().loss) << "\n";

  ckpt.stage = "ldm";
  ckpt.denoiser = std::move(res.model);
  ckpt.stats = stats;
  ckpt.info["cond_dropout"] = ldm_cfg.cond_dropout;
  save_checkpoint(paths.ldm_ckpt(), ckpt);
}

std::string rl_tag(const RlOptions& opts) {
  if (opts.tag) return *opts.tag;
  std::string tag = grpo::algorithm_name(opts.algorithm);
  if (!opts.diversity) tag += "_nodiv";
  if (opts.property) tag += "_bandgap";
  return tag;
}

grpo::RlResult rl_finetune_stage(const RunConfig& cfg, const RlOptions& opts, std::ostream& log) {
  const RunPaths paths{cfg.out_dir};
  const Checkpoint base = require_checkpoint(paths.ldm_ckpt(), true);
  const auto corpus = load_crystals(paths.corpus());
  if (!std::filesystem::exists(paths.hull_refs())) throw std::runtime_error("missing " + paths.hull_refs().string());
  const std::string tag = rl_tag(opts);
  save_config(cfg, paths.resolved_config("rl-finetune-" + tag));

  auto options = cfg.reward_options(opts.property ? rewards::RewardMode::Property : rewards::RewardMode::DeNovo);
  options.diversity = options.diversity && opts.diversity;
  if (opts.property && !base.surrogate) throw CheckpointError("checkpoint has no bandgap surrogate");
  const rewards::RewardModel reward_model(
      base.vae, oracle::StabilityOracle{oracle::ElementTable(), oracle::HullReferenceSet::load(paths.hull_refs())},
      corpus, options, opts.property ? base.surrogate : std::nullopt);
  const auto sched = base.schedule();
  const grpo::RlEnvironment env{base.vae, *base.stats, sched, reward_model, base.n_atoms_pool};

  auto rl_cfg = cfg.grpo;
  rl_cfg.algorithm = opts.algorithm;

  std::vector<std::string> names;
  auto csv = open_out(paths.rl_log(tag));
  grpo::RlCallbacks cb;
  cb.on_step = [&](const grpo::RlLogRow& row) {
    if (names.empty()) {
      for (const auto& [name, v] : row.components) names.push_back(name);
      csv << grpo::rl_log_header(names) << '\n';
    }
    csv << grpo::rl_log_line(row, names) << '\n' << std::flush;
  };
  Checkpoint out = base;
  out.stage = "rl";
  cb.on_checkpoint = [&](std::size_t step, const diffusion::Denoiser& policy) {
    out.denoiser = policy;
    out.info["rl_step"] = step;
    save_checkpoint(paths.dir / ("rl_" + tag + ".partial.ckpt"), out);
  };
  auto res = grpo::train_rl(*base.denoiser, env, rl_cfg, cb);

  out.denoiser = res.policy;
  out.info["rl_step"] = res.log.size();
  out.info["algorithm"] = grpo::algorithm_name(opts.algorithm);
  out.info["diversity"] = options.diversity;
  out.info["property"] = opts.property;
  out.info["stop_reason"] = res.stop_reason;
  save_checkpoint(paths.rl_ckpt(tag), out);
  std::filesystem::remove(paths.dir / ("rl_" + tag + ".partial.ckpt"));
  log << "rl " << tag << ": " << res.log.size() << " steps, " << res.stop_reason << "\n";
  return res;
}

eval::GeneratedBatch sample_from(const Checkpoint& ckpt, const SampleOptions& opts) {
  if (!ckpt.denoiser || !ckpt.stats) throw CheckpointError("checkpoint holds no denoiser");
  if (opts.guidance_scale && !opts.cond_bandgap)
    throw std::invalid_argument("--guidance-scale needs --cond-bandgap");
  const auto sched = ckpt.schedule();
  const eval::Generator gen{*ckpt.denoiser, ckpt.vae, *ckpt.stats, sched};
  eval::SampleRequest req;
  req.n = opts.n;
  req.seed = opts.seed;
  req.n_steps = ckpt.sample_steps;
  req.n_atoms_pool = ckpt.n_atoms_pool;
  req.property = opts.cond_bandgap;
  req.guidance_scale = opts.guidance_scale;
  return eval::generate(gen, req);
}

eval::BenchmarkReport evaluate_samples(const std::vector<crystal::Crystal>& samples,
                                       const std::vector<crystal::Crystal>& corpus, const Checkpoint& ckpt,
                                       double metastable_threshold) {
  const oracle::ElementTable table;
  const oracle::StabilityOracle stab{table, oracle::HullReferenceSet::from_crystals(corpus, table)};
  const rewards::ReferenceIndex refs(corpus);
  const Tensor ref_emb = rewards::structural_embeddings(ckpt.vae, corpus);
  const eval::EvalContext ctx{ckpt.vae, stab, refs, ref_emb, metastable_threshold};
  return eval::evaluate(samples, ctx);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"RL-guided latent diffusion for toy crystals"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = all cores)");

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> size;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "TOML run config")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "run directory (overrides run.out_dir)");
  };

  auto* gen = app.add_subcommand("gen-data", "synthetic corpus and hull references");
  add_config(gen);
  gen->add_option("--seed", seed, "corpus seed");
  gen->add_option("--size", size, "corpus size");

  auto* tvae = app.add_subcommand("train-vae", "train the crystal VAE and bandgap surrogate");
  add_config(tvae);

  bool cfg_dropout = false;
  auto* tldm = app.add_subcommand("train-ldm", "train the latent denoiser");
  add_config(tldm);
  tldm->add_flag("--cfg-dropout", cfg_dropout, "train with property dropout for guidance");

  std::string algo = "grpo", property, tag;
  bool no_diversity = false;
  std::optional<double> target;
  auto* rl = app.add_subcommand("rl-finetune", "policy-gradient fine-tuning of the denoiser");
  add_config(rl);
  rl->add_option("--algo", algo)->check(CLI::IsMember({"grpo", "reinforce"}));
  rl->add_flag("--no-diversity", no_diversity, "drop both diversity rewards");
  rl->add_option("--property", property, "property objective")->check(CLI::IsMember({"bandgap"}));
  rl->add_option("--target", target, "property target (eV)");
  rl->add_option("--tag", tag, "name of the output checkpoint and log");

  std::string ckpt_path, samples_path, corpus_path, out_path, csv_path;
  std::size_t n = 512;
  std::uint64_t sample_seed = 7;
  std::optional<double> guidance, cond_bandgap;
  auto* smp = app.add_subcommand("sample", "draw crystals from a checkpoint");
  smp->add_option("--ckpt", ckpt_path)->required();
  smp->add_option("--n", n);
  smp->add_option("--seed", sample_seed);
  smp->add_option("--guidance-scale", guidance);
  smp->add_option("--cond-bandgap", cond_bandgap);
  smp->add_option("--out", out_path, "structures JSON lines")->required();

  double threshold = 0.1;
  auto* ev = app.add_subcommand("evaluate", "benchmark metrics for a sample file");
  ev->add_option("--samples", samples_path)->required()->check(CLI::ExistingFile);
  ev->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
  ev->add_option("--ckpt", ckpt_path, "checkpoint whose encoder embeds samples for FMD")->required();
  ev->add_option("--out", out_path, "report JSON");
  ev->add_option("--csv", csv_path, "per-sample CSV");
  ev->add_option("--threshold", threshold, "metastability window (eV/atom)");

  auto* emb = app.add_subcommand("export-embeddings", "latent embeddings with PCA coordinates");
  emb->add_option("--samples", samples_path)->required()->check(CLI::ExistingFile);
  emb->add_option("--ckpt", ckpt_path)->required();
  emb->add_option("--corpus", corpus_path, "reference corpus for the novelty flags")->required()->check(
      CLI::ExistingFile);
  emb->add_option("--out", out_path, "embeddings CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kBadConfig;
  }

  try {
    nk::set_thread_count(threads);
    auto resolve = [&]() {
      RunConfig cfg = config_path.empty() ? default_config() : load_config(config_path);
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      return cfg;
    };

    if (*gen) {
      RunConfig cfg = resolve();
      if (seed) cfg.corpus.seed = *seed;
      if (size) cfg.corpus.size = *size;
      gen_data(cfg, out);
    } else if (*tvae) {
      const auto rep = train_vae_stage(resolve(), out);
      out << json{{"recon_val", rep.recon_val}, {"surrogate_val_mae", rep.surrogate.val_mae}}.dump() << "\n";
    } else if (*tldm) {
      train_ldm_stage(resolve(), cfg_dropout, out);
    } else if (*rl) {
      RunConfig cfg = resolve();
      RlOptions opts;
      opts.algorithm = grpo::parse_algorithm(algo);
      opts.diversity = !no_diversity;
      opts.property = !property.empty();
      if (target) {
        if (!opts.property) throw ConfigError("--target", "only valid with --property");
        cfg.property.target = *target;
      }
      if (!tag.empty()) opts.tag = tag;
      rl_finetune_stage(cfg, opts, out);
    } else if (*smp) {
      const auto ckpt = require_checkpoint(ckpt_path, true);
      SampleOptions opts{n, sample_seed, guidance, cond_bandgap};
      if (guidance && !cond_bandgap) throw ConfigError("--guidance-scale", "needs --cond-bandgap");
      const auto batch = sample_from(ckpt, opts);
      if (std::filesystem::path(out_path).has_parent_path())
        std::filesystem::create_directories(std::filesystem::path(out_path).parent_path());
      crystal::write_jsonl(out_path, batch.crystals);
      out << "wrote " << batch.crystals.size() << " structures to " << out_path << "\n";
    } else if (*ev) {
      const auto ckpt = require_checkpoint(ckpt_path, false);
      const auto rep = evaluate_samples(crystal::read_jsonl(samples_path), crystal::read_jsonl(corpus_path), ckpt,
                                        threshold);
      if (!out_path.empty()) {
        if (csv_path.empty()) csv_path = std::filesystem::path(out_path).replace_extension(".csv").string();
        eval::write_report(rep, out_path, csv_path);
      }
      out << eval::report_json(rep) << "\n";
    } else if (*emb) {
      const auto ckpt = require_checkpoint(ckpt_path, false);
      const auto rep = evaluate_samples(crystal::read_jsonl(samples_path), crystal::read_jsonl(corpus_path), ckpt);
      eval::write_embeddings(rep, out_path);
      out << "wrote " << rep.n << " embeddings to " << out_path << "\n";
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return kMissingCheckpoint;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}

}  // namespace crl::cli
