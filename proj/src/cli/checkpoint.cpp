#include "crl/cli/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace crl::cli {

using nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic = {'C', 'R', 'L', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw CheckpointError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

json vae_config_json(const vae::VaeConfig& c) {
  return {{"latent_dim", c.latent_dim},       {"max_atoms", c.max_atoms},         {"species_embed", c.species_embed},
          {"atom_hidden", c.atom_hidden},     {"hidden", c.hidden},               {"min_length", c.min_length},
          {"min_angle_deg", c.min_angle_deg}, {"max_angle_deg", c.max_angle_deg}};
}

vae::VaeConfig vae_config_from(const json& j) {
  vae::VaeConfig c;
  c.latent_dim = j.at("latent_dim");
  c.max_atoms = j.at("max_atoms");
  c.species_embed = j.at("species_embed");
  c.atom_hidden = j.at("atom_hidden");
  c.hidden = j.at("hidden");
  c.min_length = j.at("min_length");
  c.min_angle_deg = j.at("min_angle_deg");
  c.max_angle_deg = j.at("max_angle_deg");
  return c;
}

json denoiser_config_json(const diffusion::DenoiserConfig& c) {
  return {{"latent_dim", c.latent_dim}, {"max_atoms", c.max_atoms},
          {"time_embed", c.time_embed}, {"cond_embed", c.cond_embed},
          {"hidden", c.hidden},         {"blocks", c.blocks},
          {"property_center", c.property_center}, {"property_scale", c.property_scale}};
}

diffusion::DenoiserConfig denoiser_config_from(const json& j) {
  diffusion::DenoiserConfig c;
  c.latent_dim = j.at("latent_dim");
  c.max_atoms = j.at("max_atoms");
  c.time_embed = j.at("time_embed");
  c.cond_embed = j.at("cond_embed");
  c.hidden = j.at("hidden");
  c.blocks = j.at("blocks");
  c.property_center = j.at("property_center");
  c.property_scale = j.at("property_scale");
  return c;
}

void put_group(TensorArchive& a, const std::string& group, const nk::ParamSet& params) {
  for (const auto& [name, t] : params) a.tensors[group + "/" + name] = t;
}

nk::ParamSet take_group(const TensorArchive& a, const std::string& group) {
  nk::ParamSet out;
  const std::string prefix = group + "/";
  for (const auto& [name, t] : a.tensors)
    if (name.compare(0, prefix.size(), prefix) == 0) out[name.substr(prefix.size())] = t;
  return out;
}

}  // namespace

void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  static_assert(std::endian::native == std::endian::little, "float64 payload is written in native order");
  json header{{"meta", archive.meta}, {"tensors", json::array()}};
  for (const auto& [name, t] : archive.tensors) header["tensors"].push_back({{"name", name}, {"shape", t.shape()}});
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : archive.tensors) {
    const auto d = t.data();
    out.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("write failed for " + path.string());
}

TensorArchive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("missing checkpoint " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw CheckpointError("not a checkpoint file: " + path.string());
  const std::uint64_t len = get_u64(in);
  if (len > (1ull << 32)) throw CheckpointError("corrupt checkpoint header");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw CheckpointError("truncated checkpoint");

  TensorArchive a;
  json header;
  try {
    header = json::parse(text);
    a.meta = header.at("meta");
    for (const auto& entry : header.at("tensors")) {
      nk::Tensor t(entry.at("shape").get<nk::Shape>());
      auto d = t.data();
      if (!in.read(reinterpret_cast<char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(double))))
        throw CheckpointError("truncated checkpoint");
      a.tensors[entry.at("name").get<std::string>()] = std::move(t);
    }
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
  return a;
}

diffusion::DiffusionSchedule Checkpoint::schedule() const { return diffusion::make_schedule(T, beta_start, beta_end); }

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  TensorArchive a;
  a.meta = {{"stage", ckpt.stage},
            {"vae", vae_config_json(ckpt.vae.config())},
            {"diffusion", {{"T", ckpt.T}, {"beta_start", ckpt.beta_start}, {"beta_end", ckpt.beta_end},
                           {"sample_steps", ckpt.sample_steps}}},
            {"n_atoms_pool", ckpt.n_atoms_pool},
            {"info", ckpt.info}};
  put_group(a, "vae", ckpt.vae.params());
  if (ckpt.surrogate) put_group(a, "surrogate", ckpt.surrogate->params());
  if (ckpt.denoiser) {
    a.meta["denoiser"] = denoiser_config_json(ckpt.denoiser->config());
    put_group(a, "denoiser", ckpt.denoiser->params());
  }
  if (ckpt.stats) {
    const auto d = ckpt.stats->mean.size();
    a.tensors["stats/mean"] = nk::Tensor({d}, ckpt.stats->mean);
    a.tensors["stats/std"] = nk::Tensor({d}, ckpt.stats->std);
  }
  write_archive(path, a);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const TensorArchive a = read_archive(path);
  Checkpoint c;
  try {
    c.stage = a.meta.at("stage");
    c.vae = vae::Vae(vae_config_from(a.meta.at("vae")), take_group(a, "vae"));
    const auto& d = a.meta.at("diffusion");
    c.T = d.at("T");
    c.beta_start = d.at("beta_start");
    c.beta_end = d.at("beta_end");
    c.sample_steps = d.at("sample_steps");
    c.n_atoms_pool = a.meta.at("n_atoms_pool").get<std::vector<int>>();
    c.info = a.meta.value("info", json::object());
    auto sur = take_group(a, "surrogate");
    if (!sur.empty()) c.surrogate = rewards::Surrogate(std::move(sur));
    if (a.meta.contains("denoiser"))
      c.denoiser = diffusion::Denoiser(denoiser_config_from(a.meta.at("denoiser")), take_group(a, "denoiser"));
    if (a.tensors.count("stats/mean")) {
      const auto& m = a.tensors.at("stats/mean");
      const auto& s = a.tensors.at("stats/std");
      c.stats = diffusion::LatentStats{{m.data().begin(), m.data().end()}, {s.data().begin(), s.data().end()}};
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  return c;
}

}  // namespace crl::cli
