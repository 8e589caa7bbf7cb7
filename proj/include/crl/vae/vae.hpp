#pragma once

#include <map>
#include <string>
#include <vector>

#include "crl/crystal/crystal.hpp"
#include "crl/numkit/autodiff.hpp"
#include "crl/numkit/rng.hpp"

namespace crl::vae {

using crystal::Crystal;
using nk::ParamSet;
using nk::Tensor;

struct VaeConfig {
  std::size_t latent_dim = 8;
  std::size_t max_atoms = crystal::kMaxAtoms;
  std::size_t species_embed = 16;
  std::size_t atom_hidden = 64;
  std::size_t hidden = 128;
  double min_length = 1.0;  // Å added to the softplus length head
  double min_angle_deg = 30.0;
  double max_angle_deg = 150.0;
  std::size_t vocab() const;    // element count + PAD
  std::size_t pad_id() const;   // index of the PAD token
};

struct ElboWeights {
  double species = 1.0;
  double lengths = 1.0;
  double angles = 10.0;
  double coords = 10.0;
  double kl = 1e-5;
};

struct LatentCode {
  std::vector<double> mu;
  std::vector<double> logvar;
};

// Crystals padded to max_atoms and flattened into the tensors the networks use.
struct Batch {
  std::size_t size = 0;
  std::vector<std::size_t> species;  // B·max_atoms, PAD for empty slots
  std::vector<int> n_atoms;
  Tensor mask;     // (B·max_atoms, 1), 1 for real atoms
  Tensor frac;     // (B·max_atoms, 3)
  Tensor lengths;  // (B, 3), Å
  Tensor angles;   // (B, 3), radians
  Tensor pool;     // (B, B·max_atoms), masked mean-pool weights
};

Batch make_batch(const std::vector<Crystal>& crystals, const VaeConfig& cfg);

class Vae {
 public:
  Vae() = default;
  Vae(const VaeConfig& cfg, std::uint64_t seed);
  Vae(const VaeConfig& cfg, ParamSet params);

  const VaeConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  struct EncoderOut {
    nk::Var mu, logvar;  // (B, latent)
  };
  struct DecoderOut {
    nk::Var species_logits;  // (B·max_atoms, vocab)
    nk::Var lengths;         // (B, 3) Å
    nk::Var angles;          // (B, 3) radians
    nk::Var coords;          // (B·max_atoms, 3), unwrapped
  };

  EncoderOut encode(nk::Tape& tape, const ParamSet& params, const Batch& batch) const;
  DecoderOut decode(nk::Tape& tape, const ParamSet& params, nk::Var z, const std::vector<int>& n_atoms) const;

  // Throws crystal::CrystalError when a crystal has more than max_atoms atoms.
  LatentCode encode(const Crystal& c) const;
  std::vector<LatentCode> encode(const std::vector<Crystal>& crystals) const;
  Crystal decode(const std::vector<double>& z, int n_atoms) const;
  // Rows of z (B, latent) decoded in one pass.
  std::vector<Crystal> decode(const Tensor& z, const std::vector<int>& n_atoms) const;

  std::vector<double> structural_embedding(const Crystal& c) const { return encode(c).mu; }
  std::vector<double> compositional_embedding(const Crystal& c) const;

 private:
  VaeConfig cfg_;
  ParamSet params_;
};

struct ElboParts {
  double species = 0, lengths = 0, angles = 0, coords = 0, kl = 0, total = 0;
};

// Returns the scalar loss node; `eps` supplies the reparameterization noise
// (B, latent). Pass a zero tensor for the posterior mean.
nk::Var elbo_loss(nk::Tape& tape, const Vae& model, const ParamSet& params, const Batch& batch, const Tensor& eps,
                  const ElboWeights& w, ElboParts* parts = nullptr);

double kl_divergence(const std::vector<double>& mu, const std::vector<double>& logvar);

// Uniform translation of fractional coordinates plus a uniformly random
// rotation of the lattice; the atom list is put back in canonical order.
Crystal augment(const Crystal& c, nk::RngStream& stream);
Crystal augment_with(const Crystal& c, const crystal::Vec3& shift, const crystal::Mat3& rotation);
crystal::Mat3 random_rotation(nk::RngStream& stream);

// Decoded lattice from lengths and angles; angle triples that cannot close a
// cell are pulled toward 90° until the cell volume is positive.
crystal::Mat3 lattice_from_prediction(const crystal::Vec3& lengths, const crystal::Vec3& angles);

}  // namespace crl::vae
