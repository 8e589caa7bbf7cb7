#include "crl/vae/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "crl/crystal/elements.hpp"
#include "crl/numkit/nn.hpp"

namespace crl::vae {

using namespace crl::nk;
using crystal::Mat3;
using crystal::Vec3;

std::size_t VaeConfig::vocab() const { return crystal::kNumElements + 1; }
std::size_t VaeConfig::pad_id() const { return crystal::kNumElements; }

Batch make_batch(const std::vector<Crystal>& crystals, const VaeConfig& cfg) {
  const std::size_t b = crystals.size(), m = cfg.max_atoms;
  Batch out;
  out.size = b;
  out.species.assign(b * m, cfg.pad_id());
  out.mask = Tensor::zeros({b * m, 1});
  out.frac = Tensor::zeros({b * m, 3});
  out.lengths = Tensor::zeros({b, 3});
  out.angles = Tensor::zeros({b, 3});
  out.pool = Tensor::zeros({b, b * m});
  for (std::size_t i = 0; i < b; ++i) {
    const Crystal& c = crystals[i];
    if (c.size() == 0 || c.size() > m) throw crystal::CrystalError("vae: atom count outside [1, max_atoms]");
    out.n_atoms.push_back(static_cast<int>(c.size()));
    const auto p = crystal::lattice_parameters(c.lattice);
    for (int k = 0; k < 3; ++k) {
      out.lengths.at(i, k) = p.lengths[k];
      out.angles.at(i, k) = p.angles[k];
    }
    for (std::size_t a = 0; a < c.size(); ++a) {
      const std::size_t row = i * m + a;
      out.species[row] = static_cast<std::size_t>(c.species[a]);
      out.mask.at(row, 0) = 1.0;
      for (int k = 0; k < 3; ++k) out.frac.at(row, k) = c.frac[a][k];
      out.pool.at(i, row) = 1.0 / static_cast<double>(c.size());
    }
  }
  return out;
}

Vae::Vae(const VaeConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  RngStream rng(seed, "vae.init");
  const std::size_t atom_in = cfg.species_embed + 9;
  init_embedding(params_, "enc.species_emb", cfg.vocab(), cfg.species_embed, rng, 0.5);
  init_linear(params_, "enc.atom1", atom_in, cfg.atom_hidden, rng);
  init_linear(params_, "enc.atom2", cfg.atom_hidden, cfg.atom_hidden, rng);
  init_linear(params_, "enc.head1", cfg.atom_hidden + 7, cfg.hidden, rng);
  init_linear(params_, "enc.head2", cfg.hidden, cfg.hidden, rng);
  init_linear(params_, "enc.mu", cfg.hidden, cfg.latent_dim, rng);
  init_linear(params_, "enc.logvar", cfg.hidden, cfg.latent_dim, rng, 0.1);
  init_linear(params_, "enc.mu_skip", 7, cfg.latent_dim, rng);
  init_linear(params_, "dec.h1", cfg.latent_dim + cfg.max_atoms, cfg.hidden, rng);
  init_linear(params_, "dec.h2", cfg.hidden, cfg.hidden, rng);
  init_linear(params_, "dec.h3", cfg.hidden, cfg.hidden, rng);
  init_linear(params_, "dec.species", cfg.hidden, cfg.max_atoms * cfg.vocab(), rng);
  init_linear(params_, "dec.lengths", cfg.hidden, 3, rng);
  init_linear(params_, "dec.angles", cfg.hidden, 3, rng);
  init_linear(params_, "dec.coords", cfg.hidden, cfg.max_atoms * 3, rng);
  // Linear paths from the latent straight to the lattice heads.
  init_linear(params_, "dec.lengths_skip", cfg.latent_dim, 3, rng);
  init_linear(params_, "dec.angles_skip", cfg.latent_dim, 3, rng);
  // Start with a narrow posterior so early reconstruction is not drowned in noise.
  for (double& v : params_["enc.logvar.b"].data()) v = -6.0;
  // Start the length head near typical cell edges (~4.5 Å).
  for (double& v : params_["dec.lengths.b"].data()) v = std::log(std::expm1(3.5));
}

Vae::Vae(const VaeConfig& cfg, ParamSet params) : cfg_(cfg), params_(std::move(params)) {}

namespace {

Tensor atom_features(const Batch& batch) {
  const std::size_t rows = batch.frac.rows();
  Tensor f({rows, 9});
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t r = 0; r < rows; ++r) {
    for (int k = 0; k < 3; ++k) {
      const double x = batch.frac.at(r, k);
      f.at(r, k) = x;
      f.at(r, 3 + k) = std::sin(two_pi * x);
      f.at(r, 6 + k) = std::cos(two_pi * x);
    }
  }
  return f;
}

Tensor lattice_features(const Batch& batch, const VaeConfig& cfg) {
  Tensor f({batch.size, 7});
  for (std::size_t i = 0; i < batch.size; ++i) {
    for (int k = 0; k < 3; ++k) {
      f.at(i, k) = batch.lengths.at(i, k) / 5.0;
      f.at(i, 3 + k) = batch.angles.at(i, k) - std::numbers::pi / 2.0;
    }
    f.at(i, 6) = static_cast<double>(batch.n_atoms[i]) / static_cast<double>(cfg.max_atoms);
  }
  return f;
}

}  // namespace

Vae::EncoderOut Vae::encode(Tape& tape, const ParamSet& params, const Batch& batch) const {
  Var emb = gather_rows(tape.param(params, "enc.species_emb"), batch.species);
  Var x = concat_cols({emb, tape.constant(atom_features(batch))});
  Var h = silu(linear(tape, params, "enc.atom1", x));
  h = silu(linear(tape, params, "enc.atom2", h));
  Var pooled = matmul(tape.constant(batch.pool), h);
  Var lattice = tape.constant(lattice_features(batch, cfg_));
  Var g = concat_cols({pooled, lattice});
  g = silu(linear(tape, params, "enc.head1", g));
  g = silu(linear(tape, params, "enc.head2", g));
  Var mu = add(linear(tape, params, "enc.mu", g), linear(tape, params, "enc.mu_skip", lattice));
  return {mu, linear(tape, params, "enc.logvar", g)};
}

Vae::DecoderOut Vae::decode(Tape& tape, const ParamSet& params, Var z, const std::vector<int>& n_atoms) const {
  const std::size_t b = n_atoms.size(), m = cfg_.max_atoms;
  Tensor onehot({b, m});
  for (std::size_t i = 0; i < b; ++i) {
    if (n_atoms[i] < 1 || n_atoms[i] > static_cast<int>(m)) throw crystal::CrystalError("vae: n_atoms out of range");
    onehot.at(i, static_cast<std::size_t>(n_atoms[i] - 1)) = 1.0;
  }
  Var h = concat_cols({z, tape.constant(onehot)});
  h = silu(linear(tape, params, "dec.h1", h));
  h = silu(linear(tape, params, "dec.h2", h));
  h = silu(linear(tape, params, "dec.h3", h));
  DecoderOut out;
  out.species_logits = reshape(linear(tape, params, "dec.species", h), {b * m, cfg_.vocab()});
  out.lengths = add_scalar(
      softplus(add(linear(tape, params, "dec.lengths", h), linear(tape, params, "dec.lengths_skip", z))),
      cfg_.min_length);
  const double lo = cfg_.min_angle_deg * std::numbers::pi / 180.0;
  const double hi = cfg_.max_angle_deg * std::numbers::pi / 180.0;
  Var angle_logits = add(linear(tape, params, "dec.angles", h), linear(tape, params, "dec.angles_skip", z));
  out.angles = add_scalar(scale(sigmoid(angle_logits), hi - lo), lo);
  out.coords = reshape(linear(tape, params, "dec.coords", h), {b * m, 3});
  return out;
}

std::vector<LatentCode> Vae::encode(const std::vector<Crystal>& crystals) const {
  if (crystals.empty()) return {};
  Tape tape(false);
  const Batch batch = make_batch(crystals, cfg_);
  const auto enc = encode(tape, params_, batch);
  std::vector<LatentCode> out(crystals.size());
  for (std::size_t i = 0; i < crystals.size(); ++i) {
    for (std::size_t k = 0; k < cfg_.latent_dim; ++k) {
      out[i].mu.push_back(enc.mu.value().at(i, k));
      out[i].logvar.push_back(enc.logvar.value().at(i, k));
    }
  }
  return out;
}

LatentCode Vae::encode(const Crystal& c) const { return encode(std::vector<Crystal>{c}).front(); }

Mat3 lattice_from_prediction(const Vec3& lengths, const Vec3& angles) {
  const double right = std::numbers::pi / 2.0;
  for (double s = 1.0; s > 1e-3; s *= 0.8) {
    crystal::LatticeParameters p{lengths, {}};
    for (int k = 0; k < 3; ++k) p.angles[k] = right + s * (angles[k] - right);
    try {
      const Mat3 l = crystal::lattice_from_parameters(p);
      if (crystal::det(l) > 0.05 * lengths[0] * lengths[1] * lengths[2]) return l;
    } catch (const crystal::CrystalError&) {
    }
  }
  return Mat3{Vec3{lengths[0], 0, 0}, Vec3{0, lengths[1], 0}, Vec3{0, 0, lengths[2]}};
}

std::vector<Crystal> Vae::decode(const Tensor& z, const std::vector<int>& n_atoms) const {
  Tape tape(false);
  const auto dec = decode(tape, params_, tape.constant(z), n_atoms);
  const std::size_t m = cfg_.max_atoms;
  std::vector<Crystal> out(n_atoms.size());
  for (std::size_t i = 0; i < n_atoms.size(); ++i) {
    Crystal& c = out[i];
    Vec3 len{}, ang{};
    for (int k = 0; k < 3; ++k) {
      len[k] = dec.lengths.value().at(i, k);
      ang[k] = dec.angles.value().at(i, k);
    }
    c.lattice = lattice_from_prediction(len, ang);
    for (int a = 0; a < n_atoms[i]; ++a) {
      const std::size_t row = i * m + static_cast<std::size_t>(a);
      std::size_t best = 0;
      for (std::size_t v = 1; v < crystal::kNumElements; ++v)
        if (dec.species_logits.value().at(row, v) > dec.species_logits.value().at(row, best)) best = v;
      c.species.push_back(static_cast<int>(best));
      c.frac.push_back({crystal::wrap01(dec.coords.value().at(row, 0)), crystal::wrap01(dec.coords.value().at(row, 1)),
                        crystal::wrap01(dec.coords.value().at(row, 2))});
    }
  }
  return out;
}

Crystal Vae::decode(const std::vector<double>& z, int n_atoms) const {
  return decode(Tensor::matrix(1, z.size(), z), std::vector<int>{n_atoms}).front();
}

std::vector<double> Vae::compositional_embedding(const Crystal& c) const {
  const Tensor& table = params_.at("enc.species_emb");
  const auto comp = crystal::Composition::of(c);
  std::vector<double> out(cfg_.species_embed, 0.0);
  for (const auto& [el, n] : comp.counts()) {
    if (el < 0 || el >= static_cast<int>(crystal::kNumElements)) throw crystal::CrystalError("unknown species");
    const double w = comp.fraction(el);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * table.at(static_cast<std::size_t>(el), k);
  }
  return out;
}

Var elbo_loss(Tape& tape, const Vae& model, const ParamSet& params, const Batch& batch, const Tensor& eps,
              const ElboWeights& w, ElboParts* parts) {
  const VaeConfig& cfg = model.config();
  const auto enc = model.encode(tape, params, batch);
  Var z = add(enc.mu, mul(exp(scale(enc.logvar, 0.5)), tape.constant(eps)));
  const auto dec = model.decode(tape, params, z, batch.n_atoms);

  const std::size_t rows = batch.species.size();
  Tensor onehot({rows, cfg.vocab()});
  for (std::size_t r = 0; r < rows; ++r) onehot.at(r, batch.species[r]) = 1.0;
  Var ce = scale(sum(mul(log_softmax_rows(dec.species_logits), tape.constant(onehot))), -1.0 / rows);
  Var len = mean(square(sub(dec.lengths, tape.constant(batch.lengths))));
  Var ang = mean(square(sub(dec.angles, tape.constant(batch.angles))));
  double atoms = 0.0;
  for (int n : batch.n_atoms) atoms += n;
  Var wrapped = wrap_periodic(sub(dec.coords, tape.constant(batch.frac)));
  Var coords = scale(sum(mul(square(wrapped), tape.constant(batch.mask))), 1.0 / (3.0 * atoms));
  Var kl_terms = sub(add(square(enc.mu), exp(enc.logvar)), add_scalar(enc.logvar, 1.0));
  Var kl = scale(sum(kl_terms), 0.5 / static_cast<double>(batch.size));

  Var total = add(add(add(scale(ce, w.species), scale(len, w.lengths)), add(scale(ang, w.angles), scale(coords, w.coords))),
                  scale(kl, w.kl));
  if (parts) {
    parts->species = ce.value().item();
    parts->lengths = len.value().item();
    parts->angles = ang.value().item();
    parts->coords = coords.value().item();
    parts->kl = kl.value().item();
    parts->total = total.value().item();
  }
  return total;
}

double kl_divergence(const std::vector<double>& mu, const std::vector<double>& logvar) {
  double s = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) s += mu[k] * mu[k] + std::exp(logvar[k]) - logvar[k] - 1.0;
  return 0.5 * s;
}

Mat3 random_rotation(RngStream& stream) {
  // Normalized Gaussian quaternion: uniform over SO(3).
  double q[4];
  double n = 0.0;
  do {
    n = 0.0;
    for (double& v : q) {
      v = stream.normal();
      n += v * v;
    }
  } while (n < 1e-12);
  n = std::sqrt(n);
  const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  return Mat3{Vec3{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
              Vec3{2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
              Vec3{2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}};
}

Crystal augment(const Crystal& c, RngStream& stream) {
  const Vec3 shift{stream.uniform(), stream.uniform(), stream.uniform()};
  return augment_with(c, shift, random_rotation(stream));
}

Crystal augment_with(const Crystal& c, const Vec3& shift, const Mat3& rotation) {
  return crystal::canonical_order(crystal::rotated(crystal::translated(c, shift), rotation));
}

}  // namespace crl::vae
