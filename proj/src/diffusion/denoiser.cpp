#include "crl/diffusion/denoiser.hpp"

#include <stdexcept>

#include "crl/numkit/nn.hpp"

namespace crl::diffusion {

using namespace crl::nk;

Denoiser::Denoiser(const DenoiserConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  RngStream rng(seed, "denoiser.init");
  init_embedding(params_, "den.natoms_emb", cfg.max_atoms, cfg.cond_embed, rng, 0.5);
  init_linear(params_, "den.prop1", 1, cfg.cond_embed, rng);
  init_linear(params_, "den.prop2", cfg.cond_embed, cfg.cond_embed, rng);
  init_embedding(params_, "den.prop_null", 1, cfg.cond_embed, rng, 0.5);
  init_linear(params_, "den.time", cfg.time_embed, cfg.time_embed, rng);
  init_linear(params_, "den.in", cfg.latent_dim + cfg.time_embed + cfg.cond_embed, cfg.hidden, rng);
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    init_linear(params_, "den.block" + std::to_string(b) + ".1", cfg.hidden, cfg.hidden, rng);
    init_linear(params_, "den.block" + std::to_string(b) + ".2", cfg.hidden, cfg.hidden, rng, 0.5);
  }
  init_linear(params_, "den.out", cfg.hidden, cfg.latent_dim, rng, 0.5);
}

Denoiser::Denoiser(const DenoiserConfig& cfg, ParamSet params) : cfg_(cfg), params_(std::move(params)) {}

Var Denoiser::predict(Tape& tape, const ParamSet& params, Var z, const std::vector<std::size_t>& t,
                      const std::vector<Condition>& cond) const {
  const std::size_t b = t.size();
  if (cond.size() != b || z.shape() != Shape{b, cfg_.latent_dim}) throw ShapeError("Denoiser::predict: batch mismatch");
  std::vector<double> tt(t.begin(), t.end());
  Var temb = silu(linear(tape, params, "den.time", tape.constant(sinusoidal_embedding(tt, cfg_.time_embed))));

  std::vector<std::size_t> natoms;
  std::vector<std::size_t> with_prop, without_prop;
  for (std::size_t i = 0; i < b; ++i) {
    if (cond[i].n_atoms < 1 || cond[i].n_atoms > static_cast<int>(cfg_.max_atoms)) {
      throw std::invalid_argument("Denoiser::predict: n_atoms out of range");
    }
    natoms.push_back(static_cast<std::size_t>(cond[i].n_atoms - 1));
  }
  Var cemb = gather_rows(tape.param(params, "den.natoms_emb"), natoms);
  // Property rows get the encoder output, the rest the null token; a 0/1
  // selector keeps the whole batch in one pass.
  Tensor values({b, 1}), has({b, 1});
  bool any = false;
  for (std::size_t i = 0; i < b; ++i) {
    if (cond[i].property) {
      values.at(i, 0) = (*cond[i].property - cfg_.property_center) / cfg_.property_scale;
      has.at(i, 0) = 1.0;
      any = true;
    }
  }
  Var null = broadcast_to(tape.param(params, "den.prop_null"), {b, cfg_.cond_embed});
  Var prop_part = null;
  if (any) {
    Var enc = linear(tape, params, "den.prop2", silu(linear(tape, params, "den.prop1", tape.constant(values))));
    Var sel = tape.constant(has);
    prop_part = add(mul(sel, enc), mul(tape.constant(Tensor::full({b, 1}, 1.0)) - sel, null));
  }
  cemb = add(cemb, prop_part);

  Var h = silu(linear(tape, params, "den.in", concat_cols({z, temb, cemb})));
  for (std::size_t k = 0; k < cfg_.blocks; ++k) {
    const std::string name = "den.block" + std::to_string(k);
    Var r = silu(linear(tape, params, name + ".1", h));
    h = add(h, linear(tape, params, name + ".2", r));
    h = silu(h);
  }
  return linear(tape, params, "den.out", h);
}

Tensor Denoiser::predict(const Tensor& z, const std::vector<std::size_t>& t, const std::vector<Condition>& cond) const {
  Tape tape(false);
  return predict(tape, params_, tape.constant(z), t, cond).value();
}

Tensor guided_eps(const Tensor& eps_cond, const Tensor& eps_null, double scale) {
  if (eps_cond.shape() != eps_null.shape()) throw ShapeError("guided_eps: shape mismatch");
  Tensor out(eps_cond.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - scale) * eps_null[i] + scale * eps_cond[i];
  return out;
}

Var guided_eps(Var eps_cond, Var eps_null, double scale) {
  return add(nk::scale(eps_null, 1.0 - scale), nk::scale(eps_cond, scale));
}

std::vector<Condition> without_property(const std::vector<Condition>& cond) {
  std::vector<Condition> out = cond;
  for (auto& c : out) c.property.reset();
  return out;
}

}  // namespace crl::diffusion
