#include <doctest.h>

#include <cmath>

#include "crl/crystal/amd.hpp"
#include "crl/crystal/corpus.hpp"
#include "crl/oracle/energy.hpp"
#include "crl/vae/train.hpp"
#include "support.hpp"

using namespace crl;
using namespace crl::vae;
using crl::nk::RngStream;
using crl::nk::Tape;
using crl::nk::Tensor;
using namespace crl::testing;

namespace {

VaeConfig tiny_config() {
  VaeConfig cfg;
  cfg.species_embed = 3;
  cfg.atom_hidden = 5;
  cfg.hidden = 6;
  return cfg;
}

std::vector<crystal::Crystal> sample_crystals(std::size_t n, std::uint64_t seed) {
  RngStream rng(seed, "vae-crystals");
  std::vector<crystal::Crystal> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(crystal::canonical_order(random_crystal(rng, 6)));
  return out;
}

bool same_code(const LatentCode& a, const LatentCode& b, double tol) {
  for (std::size_t k = 0; k < a.mu.size(); ++k) {
    if (std::abs(a.mu[k] - b.mu[k]) > tol || std::abs(a.logvar[k] - b.logvar[k]) > tol) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("encoder determinism and symmetry") {
  const Vae model(VaeConfig{}, 3);
  for (const auto& c : sample_crystals(20, 1)) {
    const auto a = model.encode(c);
    const auto b = model.encode(c);
    CHECK(a.mu == b.mu);
    CHECK(a.logvar == b.logvar);
    CHECK(same_code(a, model.encode(reversed_atoms(c)), 1e-9));
    CHECK_FALSE(same_code(a, model.encode(crystal::translated(c, {0.3, 0.3, 0.3})), 1e-6));
    CHECK(model.structural_embedding(c) == a.mu);
  }
  auto big = simple_cubic(4.0);
  for (int i = 0; i < 8; ++i) {
    big.species.push_back(0);
    big.frac.push_back({0.1 * i, 0.0, 0.0});
  }
  CHECK_THROWS_AS(model.encode(big), crystal::CrystalError);
}

TEST_CASE("decoder always emits valid crystals") {
  const Vae model(VaeConfig{}, 5);
  RngStream rng(6, "decode-fuzz");
  const std::size_t batch = 500;
  for (int round = 0; round < 20; ++round) {
    const double spread = round < 10 ? 1.0 : std::pow(10.0, round - 9);
    Tensor z = rng.normal({batch, 8});
    for (double& v : z.data()) v *= spread;
    std::vector<int> n_atoms(batch);
    for (auto& n : n_atoms) n = 1 + static_cast<int>(rng.below(8));
    const auto out = model.decode(z, n_atoms);
    for (std::size_t i = 0; i < batch; ++i) {
      CHECK(crystal::is_valid(out[i]));
      CHECK(static_cast<int>(out[i].size()) == n_atoms[i]);
    }
  }
  const std::vector<double> z(8, 0.25);
  CHECK(crystal::canonical_order(model.decode(z, 4)).frac == crystal::canonical_order(model.decode(z, 4)).frac);
  // Impossible angle triples are pulled back to a valid cell.
  const auto l = lattice_from_prediction({4, 4, 4}, {0.6, 0.6, 2.6});
  CHECK(crystal::det(l) > 0.0);
}

TEST_CASE("ELBO components match direct arithmetic") {
  const Vae model(tiny_config(), 9);
  const auto crystals = sample_crystals(5, 2);
  const Batch batch = make_batch(crystals, model.config());
  RngStream rng(10, "elbo-eps");
  const Tensor eps = rng.normal({batch.size, 8});
  Tape tape(false);
  ElboParts parts;
  elbo_loss(tape, model, model.params(), batch, eps, ElboWeights{}, &parts);

  Tape t2(false);
  const auto enc = model.encode(t2, model.params(), batch);
  double kl = 0.0;
  Tensor z({batch.size, 8});
  for (std::size_t i = 0; i < batch.size; ++i) {
    std::vector<double> mu(8), lv(8);
    for (std::size_t k = 0; k < 8; ++k) {
      mu[k] = enc.mu.value().at(i, k);
      lv[k] = enc.logvar.value().at(i, k);
      z.at(i, k) = mu[k] + std::exp(0.5 * lv[k]) * eps.at(i, k);
    }
    kl += kl_divergence(mu, lv);
  }
  CHECK(parts.kl == doctest::Approx(kl / batch.size).epsilon(1e-12));

  const auto dec = model.decode(t2, model.params(), t2.constant(z), batch.n_atoms);
  double ce = 0.0, len = 0.0, coords = 0.0, atoms = 0.0;
  for (std::size_t r = 0; r < batch.species.size(); ++r) {
    double mx = -1e300, s = 0.0;
    for (std::size_t v = 0; v < model.config().vocab(); ++v) mx = std::max(mx, dec.species_logits.value().at(r, v));
    for (std::size_t v = 0; v < model.config().vocab(); ++v) s += std::exp(dec.species_logits.value().at(r, v) - mx);
    ce -= dec.species_logits.value().at(r, batch.species[r]) - mx - std::log(s);
    if (batch.mask.at(r, 0) > 0) {
      atoms += 1;
      for (int k = 0; k < 3; ++k) {
        double d = std::abs(dec.coords.value().at(r, k) - batch.frac.at(r, k));
        d = d - std::floor(d);
        d = std::min(d, 1.0 - d);
        coords += d * d;
      }
    }
  }
  for (std::size_t i = 0; i < batch.size; ++i)
    for (int k = 0; k < 3; ++k) len += std::pow(dec.lengths.value().at(i, k) - batch.lengths.at(i, k), 2);
  CHECK(parts.species == doctest::Approx(ce / batch.species.size()).epsilon(1e-10));
  CHECK(parts.lengths == doctest::Approx(len / (3.0 * batch.size)).epsilon(1e-10));
  CHECK(parts.coords == doctest::Approx(coords / (3.0 * atoms)).epsilon(1e-10));
  CHECK(parts.total == doctest::Approx(parts.species + parts.lengths + 10 * parts.angles + 10 * parts.coords +
                                       1e-5 * parts.kl)
                           .epsilon(1e-12));
}

TEST_CASE("KL divergence") {
  CHECK(kl_divergence(std::vector<double>(8, 0.0), std::vector<double>(8, 0.0)) == 0.0);
  RngStream rng(12, "kl");
  for (int t = 0; t < 100; ++t) {
    std::vector<double> mu(8), lv(8);
    for (auto& v : mu) v = rng.normal();
    for (auto& v : lv) v = rng.normal();
    double expected = 0.0;
    for (int k = 0; k < 8; ++k) expected += 0.5 * (mu[k] * mu[k] + std::exp(lv[k]) - lv[k] - 1.0);
    CHECK(kl_divergence(mu, lv) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(kl_divergence(mu, lv) > 0.0);
  }
}

TEST_CASE("ELBO gradient matches finite differences") {
  const Vae model(tiny_config(), 13);
  const auto crystals = sample_crystals(3, 4);
  const Batch batch = make_batch(crystals, model.config());
  RngStream rng(14, "elbo-fd");
  const Tensor eps = rng.normal({batch.size, 8});
  Tape tape;
  auto loss = elbo_loss(tape, model, model.params(), batch, eps, ElboWeights{});
  const auto grads = tape.gradient(loss, model.params());
  auto eval = [&](const nk::ParamSet& p) {
    Tape t(false);
    return elbo_loss(t, model, p, batch, eps, ElboWeights{}).value().item();
  };
  nk::ParamSet params = model.params();
  double diff = 0.0, norm_a = 0.0, norm_b = 0.0;
  for (auto& [name, value] : params) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double orig = value[i];
      value[i] = orig + 1e-5;
      const double up = eval(params);
      value[i] = orig - 1e-5;
      const double down = eval(params);
      value[i] = orig;
      const double fd = (up - down) / 2e-5;
      const double g = grads.at(name)[i];
      diff += (fd - g) * (fd - g);
      norm_a += g * g;
      norm_b += fd * fd;
    }
  }
  CHECK(std::sqrt(diff) / std::max(std::sqrt(norm_a), std::sqrt(norm_b)) < 1e-4);
}

TEST_CASE("augmentation preserves geometry") {
  const oracle::EnergyConfig ecfg;
  RngStream rng(15, "augment");
  for (const auto& c : sample_crystals(20, 5)) {
    const auto a = augment(c, rng);
    CHECK(crystal::amd_chebyshev(crystal::amd(c), crystal::amd(a)) < 1e-9);
    CHECK(std::abs(oracle::toy_total_energy(c, ecfg) - oracle::toy_total_energy(a, ecfg)) < 1e-9);
    const crystal::Mat3 identity{crystal::Vec3{1, 0, 0}, crystal::Vec3{0, 1, 0}, crystal::Vec3{0, 0, 1}};
    const auto same = augment_with(c, {0, 0, 0}, identity);
    CHECK(same.lattice == c.lattice);
    CHECK(same.frac == c.frac);
    CHECK(same.species == c.species);
  }
  const auto r = random_rotation(rng);
  CHECK(crystal::det(r) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("compositional embedding") {
  const Vae model(VaeConfig{}, 17);
  const auto& table = model.params().at("enc.species_emb");
  auto a = simple_cubic(3.0, 2);
  const auto ea = model.compositional_embedding(a);
  for (std::size_t k = 0; k < ea.size(); ++k) CHECK(ea[k] == table.at(2, k));
  RngStream rng(18, "comp-emb");
  for (const auto& c : sample_crystals(20, 6)) {
    auto moved = c;
    for (auto& f : moved.frac) f = {rng.uniform(), rng.uniform(), rng.uniform()};
    moved.lattice[0][0] *= 1.3;
    CHECK(model.compositional_embedding(c) == model.compositional_embedding(moved));
    const auto comp = crystal::Composition::of(c);
    const auto e = model.compositional_embedding(c);
    for (std::size_t k = 0; k < e.size(); ++k) {
      double expected = 0.0;
      for (const auto& [el, n] : comp.counts())
        expected += static_cast<double>(n) / c.size() * table.at(static_cast<std::size_t>(el), k);
      CHECK(e[k] == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("training is deterministic and reduces the loss") {
  const auto corpus = crystal::crystals_of(crystal::gen_corpus(11, 200));
  VaeTrainConfig cfg;
  cfg.seed = 4;
  cfg.batch_size = 16;
  cfg.max_steps = 100;
  cfg.eval_every = 50;
  VaeConfig mc;
  mc.hidden = 32;
  mc.atom_hidden = 16;
  const auto a = train_vae(corpus, mc, cfg);
  const auto b = train_vae(corpus, mc, cfg);
  CHECK(a.model.params() == b.model.params());
  REQUIRE(a.log.size() == 2);
  CHECK(a.log.back().train.total < a.log.front().train.total);
  const auto fresh = Vae(mc, cfg.seed);
  std::vector<crystal::Crystal> val;
  for (auto i : a.val_idx) val.push_back(corpus[i]);
  CHECK(validation_loss(a.model, val, cfg.weights) < validation_loss(fresh, val, cfg.weights));
  cfg.batch_size = 64;
  CHECK_THROWS_AS(train_vae(corpus, mc, cfg), std::invalid_argument);
}
