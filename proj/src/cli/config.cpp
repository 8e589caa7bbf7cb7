#include "crl/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace crl::cli {

namespace {

struct Token {
  enum Kind { String, Number, Bool } kind = Number;
  std::string text;
};

template <class T>
void assign(T& out, const Token& t, const std::string& key) {
  if constexpr (std::is_same_v<T, bool>) {
    if (t.kind != Token::Bool) throw ConfigError(key, "expected true or false");
    out = t.text == "true";
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (t.kind != Token::String) throw ConfigError(key, "expected a quoted string");
    out = t.text;
  } else if constexpr (std::is_same_v<T, grpo::Algorithm>) {
    if (t.kind != Token::String) throw ConfigError(key, "expected \"grpo\" or \"reinforce\"");
    try {
      out = grpo::parse_algorithm(t.text);
    } catch (const std::exception& e) {
      throw ConfigError(key, e.what());
    }
  } else {
    if (t.kind != Token::Number) throw ConfigError(key, "expected a number");
    const char* first = t.text.data();
    const char* last = first + t.text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) {
      if constexpr (std::is_floating_point_v<T>)
        throw ConfigError(key, "not a number: " + t.text);
      else
        throw ConfigError(key, "not a non-negative integer: " + t.text);
    }
  }
}

std::string render_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + "\"";
}

template <class T>
std::string render(const T& v) {
  if constexpr (std::is_same_v<T, bool>)
    return v ? "true" : "false";
  else if constexpr (std::is_same_v<T, std::string>)
    return quote(v);
  else if constexpr (std::is_same_v<T, grpo::Algorithm>)
    return quote(grpo::algorithm_name(v));
  else if constexpr (std::is_floating_point_v<T>)
    return render_double(v);
  else
    return std::to_string(v);
}

struct Field {
  std::string key;
  std::string comment;
  std::function<void(RunConfig&, const Token&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define CRL_FIELD(path, member, note)                                                   \
  Field {                                                                               \
    path, note, [](RunConfig& c, const Token& t) { assign(c.member, t, path); },        \
        [](const RunConfig& c) { return render(c.member); }                             \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      CRL_FIELD("run.seed", seed, "stage seeds left unset follow this one"),
      CRL_FIELD("run.out_dir", out_dir, ""),

      CRL_FIELD("corpus.seed", corpus.seed, ""),
      CRL_FIELD("corpus.size", corpus.size, "desk scale"),
      CRL_FIELD("corpus.variants_per_phase", corpus.params.variants_per_phase, ""),
      CRL_FIELD("corpus.perturbation", corpus.params.perturbation, "Å"),
      CRL_FIELD("corpus.non_neutral_fraction", corpus.params.non_neutral_fraction, ""),
      CRL_FIELD("corpus.amd_k", corpus.params.amd.k, "published: 100"),
      CRL_FIELD("corpus.amd_tol", corpus.params.match.amd_tol, "Å, Chebyshev"),

      CRL_FIELD("vae.latent_dim", vae.latent_dim, "published: 8"),
      CRL_FIELD("vae.species_embed", vae.species_embed, ""),
      CRL_FIELD("vae.atom_hidden", vae.atom_hidden, ""),
      CRL_FIELD("vae.hidden", vae.hidden, ""),
      CRL_FIELD("vae.min_length", vae.min_length, "Å"),
      CRL_FIELD("vae.min_angle_deg", vae.min_angle_deg, ""),
      CRL_FIELD("vae.max_angle_deg", vae.max_angle_deg, ""),
      CRL_FIELD("vae.seed", vae_train.seed, ""),
      CRL_FIELD("vae.batch_size", vae_train.batch_size, "published: 256"),
      CRL_FIELD("vae.lr", vae_train.lr, "published: 1e-4"),
      CRL_FIELD("vae.weight_decay", vae_train.weight_decay, ""),
      CRL_FIELD("vae.lr_final_fraction", vae_train.lr_final_fraction, "cosine decay floor"),
      CRL_FIELD("vae.max_steps", vae_train.max_steps, ""),
      CRL_FIELD("vae.eval_every", vae_train.eval_every, ""),
      CRL_FIELD("vae.patience", vae_train.patience, "evaluations"),
      CRL_FIELD("vae.val_fraction", vae_train.val_fraction, ""),
      CRL_FIELD("vae.augment_prob", vae_train.augment_prob, ""),
      CRL_FIELD("vae.w_species", vae_train.weights.species, "published: 1"),
      CRL_FIELD("vae.w_lengths", vae_train.weights.lengths, "published: 1"),
      CRL_FIELD("vae.w_angles", vae_train.weights.angles, "published: 10"),
      CRL_FIELD("vae.w_coords", vae_train.weights.coords, "published: 10"),
      CRL_FIELD("vae.w_kl", vae_train.weights.kl, "published: 1e-5"),

      CRL_FIELD("surrogate.seed", surrogate.seed, ""),
      CRL_FIELD("surrogate.hidden", surrogate.hidden, ""),
      CRL_FIELD("surrogate.layers", surrogate.layers, ""),
      CRL_FIELD("surrogate.batch_size", surrogate.batch_size, ""),
      CRL_FIELD("surrogate.lr", surrogate.lr, ""),
      CRL_FIELD("surrogate.weight_decay", surrogate.weight_decay, ""),
      CRL_FIELD("surrogate.max_steps", surrogate.max_steps, ""),
      CRL_FIELD("surrogate.eval_every", surrogate.eval_every, ""),
      CRL_FIELD("surrogate.patience", surrogate.patience, "evaluations"),
      CRL_FIELD("surrogate.val_fraction", surrogate.val_fraction, ""),

      CRL_FIELD("diffusion.T", diffusion.T, "published: 1000"),
      CRL_FIELD("diffusion.beta_start", diffusion.beta_start, ""),
      CRL_FIELD("diffusion.beta_end", diffusion.beta_end, ""),
      CRL_FIELD("diffusion.sample_steps", diffusion.sample_steps, "published: 50 DDIM steps"),

      CRL_FIELD("denoiser.time_embed", denoiser.time_embed, ""),
      CRL_FIELD("denoiser.cond_embed", denoiser.cond_embed, ""),
      CRL_FIELD("denoiser.hidden", denoiser.hidden, ""),
      CRL_FIELD("denoiser.blocks", denoiser.blocks, ""),
      CRL_FIELD("denoiser.property_center", denoiser.property_center, "eV"),
      CRL_FIELD("denoiser.property_scale", denoiser.property_scale, "eV"),

      CRL_FIELD("ldm.seed", ldm.seed, ""),
      CRL_FIELD("ldm.batch_size", ldm.batch_size, ""),
      CRL_FIELD("ldm.lr", ldm.lr, ""),
      CRL_FIELD("ldm.lr_final_fraction", ldm.lr_final_fraction, ""),
      CRL_FIELD("ldm.weight_decay", ldm.weight_decay, ""),
      CRL_FIELD("ldm.max_steps", ldm.max_steps, ""),
      CRL_FIELD("ldm.log_every", ldm.log_every, ""),

      CRL_FIELD("guidance.scale", guidance.scale, "published: 2.0"),
      CRL_FIELD("guidance.cond_dropout", guidance.cond_dropout, "used by train-ldm --cfg-dropout"),

      CRL_FIELD("grpo.seed", grpo.seed, ""),
      CRL_FIELD("grpo.algorithm", grpo.algorithm, "grpo | reinforce"),
      CRL_FIELD("grpo.group_size", grpo.group_size, "published: 64"),
      CRL_FIELD("grpo.conditions_per_step", grpo.conditions_per_step, "published: 5"),
      CRL_FIELD("grpo.rollout_steps", grpo.rollout_steps, "published: 50"),
      CRL_FIELD("grpo.eta", grpo.eta, "1 = ancestral"),
      CRL_FIELD("grpo.clip_eps", grpo.objective.clip_eps, "published: 1e-3"),
      CRL_FIELD("grpo.kl_weight", grpo.objective.kl_weight, "published: 1.0"),
      CRL_FIELD("grpo.entropy_weight", grpo.objective.entropy_weight, "published: 1e-5"),
      CRL_FIELD("grpo.lr", grpo.lr, "published: 1e-5"),
      CRL_FIELD("grpo.weight_decay", grpo.weight_decay, ""),
      CRL_FIELD("grpo.max_grad_norm", grpo.max_grad_norm, ""),
      CRL_FIELD("grpo.inner_batches", grpo.inner_batches, "published: 2"),
      CRL_FIELD("grpo.patience", grpo.patience, "published: 500"),
      CRL_FIELD("grpo.plateau_tol", grpo.plateau_tol, ""),
      CRL_FIELD("grpo.max_steps", grpo.max_steps, ""),
      CRL_FIELD("grpo.checkpoint_every", grpo.checkpoint_every, ""),
      CRL_FIELD("grpo.std_floor", grpo.std_floor, ""),
      CRL_FIELD("grpo.learnable_sigma", grpo.learnable_sigma, ""),

      CRL_FIELD("rewards.creativity", rewards.weights.creativity, "published: 1.0"),
      CRL_FIELD("rewards.stability", rewards.weights.stability, "published: 1.0"),
      CRL_FIELD("rewards.comp_diversity", rewards.weights.comp_diversity, "published: 1.0"),
      CRL_FIELD("rewards.struct_diversity", rewards.weights.struct_diversity, "published: 0.1"),
      CRL_FIELD("rewards.kernel_degree", rewards.kernel.degree, ""),
      CRL_FIELD("rewards.kernel_offset", rewards.kernel.offset, ""),
      CRL_FIELD("rewards.diversity", rewards.diversity, "false for the mode-collapse ablation"),

      CRL_FIELD("property.target", property.target, "published: 3.0 eV"),
      CRL_FIELD("property.w_gap", property.w_gap, "published: 1.0"),
      CRL_FIELD("property.w_div", property.w_div, "published: 0.5"),

      CRL_FIELD("sample.seed", sample.seed, ""),
      CRL_FIELD("sample.n", sample.n, ""),

      CRL_FIELD("eval.metastable_threshold", eval.metastable_threshold, "published: 0.1 eV/atom"),
      CRL_FIELD("eval.diversity_samples", eval.diversity_samples, "samples per distinct-formula count"),
  };
  return all;
}

#undef CRL_FIELD

const std::set<std::string>& stage_seed_keys() {
  static const std::set<std::string> keys = {"corpus.seed", "vae.seed", "surrogate.seed",
                                             "ldm.seed",    "grpo.seed", "sample.seed"};
  return keys;
}

void set_stage_seeds(RunConfig& c, std::uint64_t seed, const std::set<std::string>& skip) {
  const Token t{Token::Number, std::to_string(seed)};
  for (const auto& f : fields())
    if (stage_seed_keys().count(f.key) && !skip.count(f.key)) f.set(c, t);
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Cuts a trailing comment, leaving '#' inside quoted strings alone.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && in_string) {
      ++i;
    } else if (line[i] == '"') {
      in_string = !in_string;
    } else if (line[i] == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

Token parse_value(const std::string& raw, const std::string& key) {
  if (raw.empty()) throw ConfigError(key, "missing value");
  if (raw.front() == '"') {
    std::string out;
    std::size_t i = 1;
    for (; i < raw.size() && raw[i] != '"'; ++i) {
      if (raw[i] == '\\') {
        if (++i == raw.size()) break;
        const char e = raw[i];
        out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
      } else {
        out += raw[i];
      }
    }
    if (i >= raw.size() || i + 1 != raw.size()) throw ConfigError(key, "malformed string " + raw);
    return {Token::String, out};
  }
  if (raw == "true" || raw == "false") return {Token::Bool, raw};
  std::string num;
  for (char ch : raw)
    if (ch != '_') num += ch;
  if (!num.empty() && num.front() == '+') num.erase(0, 1);
  return {Token::Number, num};
}

}  // namespace

diffusion::DiffusionSchedule RunConfig::schedule() const {
  return diffusion::make_schedule(diffusion.T, diffusion.beta_start, diffusion.beta_end);
}

rewards::RewardOptions RunConfig::reward_options(rewards::RewardMode mode) const {
  rewards::RewardOptions o;
  o.mode = mode;
  o.weights = rewards.weights;
  o.property = property;
  o.kernel = rewards.kernel;
  o.diversity = rewards.diversity;
  return o;
}

RunConfig default_config(std::uint64_t seed) {
  RunConfig c;
  c.seed = seed;
  set_stage_seeds(c, seed, {});
  return c;
}

RunConfig parse_config(const std::string& text) {
  RunConfig c = default_config();
  std::map<std::string, const Field*> by_key;
  std::set<std::string> sections;
  for (const auto& f : fields()) {
    by_key[f.key] = &f;
    sections.insert(f.key.substr(0, f.key.find('.')));
  }

  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(where, "malformed section header");
      section = trim(body.substr(1, body.size() - 2));
      if (!sections.count(section)) throw ConfigError(section, "unknown section");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where, "expected key = value");
    const std::string name = trim(body.substr(0, eq));
    if (section.empty()) throw ConfigError(name, "key outside a [section]");
    const std::string key = section + "." + name;
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError(key, "unknown key");
    if (!seen.insert(key).second) throw ConfigError(key, "duplicate key");
    it->second->set(c, parse_value(trim(body.substr(eq + 1)), key));
  }
  set_stage_seeds(c, c.seed, seen);
  c.denoiser.latent_dim = c.vae.latent_dim;
  c.denoiser.max_atoms = c.vae.max_atoms;

  if (c.vae.latent_dim == 0) throw ConfigError("vae.latent_dim", "must be positive");
  if (c.diffusion.T < 2) throw ConfigError("diffusion.T", "must be at least 2");
  if (c.diffusion.sample_steps == 0 || c.diffusion.sample_steps > c.diffusion.T)
    throw ConfigError("diffusion.sample_steps", "must lie in [1, T]");
  if (!(c.diffusion.beta_start > 0.0 && c.diffusion.beta_start <= c.diffusion.beta_end && c.diffusion.beta_end < 1.0))
    throw ConfigError("diffusion.beta_end", "need 0 < beta_start <= beta_end < 1");
  if (c.grpo.group_size < 2) throw ConfigError("grpo.group_size", "must be at least 2");
  if (c.grpo.rollout_steps == 0 || c.grpo.rollout_steps > c.diffusion.T)
    throw ConfigError("grpo.rollout_steps", "must lie in [1, T]");
  if (c.grpo.inner_batches == 0) throw ConfigError("grpo.inner_batches", "must be positive");
  if (c.rewards.kernel.degree < 1) throw ConfigError("rewards.kernel_degree", "must be positive");
  if (c.sample.n == 0) throw ConfigError("sample.n", "must be positive");
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_toml(const RunConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string sec = f.key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << "\n";
      out << "[" << sec << "]\n";
      section = sec;
    }
    out << f.key.substr(dot + 1) << " = " << f.get(cfg);
    if (!f.comment.empty()) out << "  # " << f.comment;
    out << "\n";
  }
  return out.str();
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_toml(cfg);
}

}  // namespace crl::cli
