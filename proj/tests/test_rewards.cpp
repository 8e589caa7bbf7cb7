#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "crl/crystal/corpus.hpp"
#include "crl/rewards/total.hpp"
#include "support.hpp"

using namespace crl;
using namespace crl::rewards;
using crl::nk::RngStream;
using namespace crl::testing;

namespace {

Tensor random_rows(RngStream& rng, std::size_t n, std::size_t d, double spread = 1.0) {
  Tensor x = rng.normal({n, d});
  for (double& v : x.data()) v *= spread;
  return x;
}

double brute_mmd(const Tensor& g, const Tensor& r, const KernelConfig& k) {
  auto K = [&](const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
    double dot = k.offset;
    for (std::size_t c = 0; c < a.cols(); ++c) dot += a.at(i, c) * b.at(j, c);
    return std::pow(dot, k.degree);
  };
  const double m = g.rows(), n = r.rows();
  double gg = 0, rr = 0, gr = 0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.rows(); ++j)
      if (i != j) gg += K(g, i, g, j);
  for (std::size_t i = 0; i < r.rows(); ++i)
    for (std::size_t j = 0; j < r.rows(); ++j)
      if (i != j) rr += K(r, i, r, j);
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < r.rows(); ++j) gr += K(g, i, r, j);
  return -gg / (m * (m - 1)) - rr / (n * (n - 1)) + 2 * gr / (m * n);
}

}  // namespace

TEST_CASE("creativity cases") {
  const auto corpus = crystal::crystals_of(crystal::gen_corpus(3, 40));
  const ReferenceIndex refs(corpus);
  auto fresh = simple_cubic(7.1, 11);  // composition absent from the corpus
  const auto fresh_flags = creativity_flags({fresh}, refs);
  CHECK(fresh_flags[0].unique);
  CHECK(fresh_flags[0].novel);
  CHECK(std::isinf(fresh_flags[0].min_amd_gap));
  CHECK(r_creativity({fresh}, refs)[0] == 1.0);

  const auto dup = r_creativity({corpus[5], corpus[5], fresh}, refs);
  CHECK(dup[0] == 0.0);
  CHECK(dup[1] == 0.0);
  CHECK(dup[2] == 1.0);

  CHECK(creativity_value({true, false, 0.3}) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(creativity_value({true, false, 1.7}) == 1.0);
  CHECK(creativity_value({false, true, 0.02}) == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(creativity_value({true, true, 0.0}) == 1.0);
  CHECK(creativity_value({false, false, 0.9}) == 0.0);

  // Not novel but unique: gap is to the matching reference structure.
  const auto only_ref = creativity_flags({corpus[7]}, refs);
  CHECK(only_ref[0].unique);
  CHECK_FALSE(only_ref[0].novel);
  CHECK(only_ref[0].min_amd_gap == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("creativity flags agree with pairwise equivalence") {
  const auto corpus = crystal::crystals_of(crystal::gen_corpus(4, 60));
  const ReferenceIndex refs(std::vector<crystal::Crystal>(corpus.begin(), corpus.begin() + 30));
  RngStream rng(5, "creativity-batch");
  for (int round = 0; round < 10; ++round) {
    std::vector<crystal::Crystal> batch;
    for (int i = 0; i < 12; ++i) {
      const auto& src = corpus[rng.below(corpus.size())];
      batch.push_back(rng.uniform() < 0.3 ? random_translation_of(src, rng) : src);
    }
    const auto flags = creativity_flags(batch, refs);
    const auto reward = r_creativity(batch, refs);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      bool unique = true, novel = true;
      for (std::size_t j = 0; j < batch.size(); ++j)
        if (j != i && crystal::equivalent(batch[i], batch[j])) unique = false;
      for (std::size_t j = 0; j < 30; ++j)
        if (crystal::equivalent(batch[i], corpus[j])) novel = false;
      CHECK(flags[i].unique == unique);
      CHECK(flags[i].novel == novel);
      CHECK(reward[i] >= 0.0);
      CHECK(reward[i] <= 1.0);
      if (unique == novel) CHECK(reward[i] == (unique ? 1.0 : 0.0));
    }
    std::vector<crystal::Crystal> rev(batch.rbegin(), batch.rend());
    const auto rev_reward = r_creativity(rev, refs);
    for (std::size_t i = 0; i < batch.size(); ++i) CHECK(rev_reward[batch.size() - 1 - i] == reward[i]);
  }
}

TEST_CASE("stability and bandgap rewards") {
  CHECK(r_stability(0.05) == doctest::Approx(-0.05).epsilon(1e-15));
  CHECK(r_stability(0.0) == 0.0);
  CHECK(r_stability(-0.3) == 0.0);
  CHECK(r_stability(1.0) == -1.0);
  CHECK(r_stability(2.0) == -1.0);
  CHECK(r_stability(std::numeric_limits<double>::infinity()) == -1.0);
  double prev = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double r = r_stability(i / 100.0);
    CHECK(r <= prev);
    CHECK(r >= -1.0);
    prev = r;
  }
  const PropertyRewardConfig cfg;
  CHECK(r_bandgap(3.0, cfg) == 0.0);
  CHECK(r_bandgap(2.0, cfg) == -1.0);
  CHECK(r_bandgap(2.5, cfg) == r_bandgap(3.5, cfg));
}

TEST_CASE("mixed MMD") {
  const KernelConfig lin{1, 0.0};
  Tensor e1 = Tensor::matrix({{1, 0}, {1, 0}}), e2 = Tensor::matrix({{0, 1}, {0, 1}});
  CHECK(mmd_mixed(e1, e2, lin) == doctest::Approx(-2.0).epsilon(1e-15));
  const Tensor same = Tensor::matrix({{0.3, -0.2}, {0.3, -0.2}, {0.3, -0.2}});
  CHECK(std::abs(mmd_mixed(same, same)) < 1e-12);
  CHECK_THROWS_AS(mmd_mixed(Tensor::matrix({{1, 0}}), e2), std::invalid_argument);
  CHECK_THROWS_AS(mmd_mixed(e1, Tensor::matrix({{1, 0}})), std::invalid_argument);

  RngStream rng(6, "mmd");
  for (int round = 0; round < 20; ++round) {
    const KernelConfig k{1 + static_cast<int>(rng.below(3)), rng.uniform() * 2};
    const std::size_t m = 2 + rng.below(10), n = 2 + rng.below(15), d = 1 + rng.below(5);
    const Tensor g = random_rows(rng, m, d), r = random_rows(rng, n, d);
    CHECK(mmd_mixed(g, r, k) == doctest::Approx(brute_mmd(g, r, k)).epsilon(1e-10));
    // Shared distinct set: 2·(full mean − off-diagonal mean) of its Gram matrix.
    double full = 0, off = 0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        double dot = k.offset;
        for (std::size_t c = 0; c < d; ++c) dot += g.at(i, c) * g.at(j, c);
        const double v = std::pow(dot, k.degree);
        full += v;
        if (i != j) off += v;
      }
    const double expected = 2 * (full / (m * m) - off / (m * (m - 1.0)));
    CHECK(mmd_mixed(g, g, k) == doctest::Approx(expected).epsilon(1e-10));
    Tensor g_rev(g.shape());
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t c = 0; c < d; ++c) g_rev.at(m - 1 - i, c) = g.at(i, c);
    CHECK(mmd_mixed(g_rev, r, k) == doctest::Approx(mmd_mixed(g, r, k)).epsilon(1e-12));
  }
}

TEST_CASE("leave-one-out diversity marginals") {
  RngStream rng(7, "loo");
  for (int round = 0; round < 50; ++round) {
    const KernelConfig k{1 + static_cast<int>(rng.below(3)), rng.uniform() * 2};
    const std::size_t m = 3 + rng.below(20), n = 2 + rng.below(30), d = 1 + rng.below(8);
    const Tensor g = random_rows(rng, m, d), r = random_rows(rng, n, d);
    const auto fast = r_diversity_marginal(g, MmdReference(r, k));
    const auto naive = r_diversity_marginal_naive(g, r, k);
    for (std::size_t i = 0; i < m; ++i) CHECK(std::abs(fast[i] - naive[i]) < 1e-9);
  }
  const Tensor r = random_rows(rng, 10, 3);
  CHECK_THROWS_AS(r_diversity_marginal(random_rows(rng, 2, 3), MmdReference(r)), std::invalid_argument);

  // Two copies of one vector among spread-out peers.
  const KernelConfig lin{1, 0.0};
  const Tensor g = Tensor::matrix({{1, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, -1, 0}});
  const Tensor ref = Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {-1, 0, 0}, {0, -1, 0}, {0, 0, -1}});
  const auto marg = r_diversity_marginal(g, MmdReference(ref, lin));
  for (std::size_t i = 2; i < 5; ++i) {
    CHECK(marg[0] < marg[i]);
    CHECK(marg[1] < marg[i]);
  }
  // Permuting the batch permutes the rewards.
  const Tensor gp = Tensor::matrix({{0, 0, 1}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {1, 0, 0}});
  const auto mp = r_diversity_marginal(gp, MmdReference(ref, lin));
  CHECK(mp[0] == doctest::Approx(marg[3]));
  CHECK(mp[1] == doctest::Approx(marg[0]));
  CHECK(mp[2] == doctest::Approx(marg[4]));
  CHECK(mp[3] == doctest::Approx(marg[2]));
  CHECK(mp[4] == doctest::Approx(marg[1]));
}

TEST_CASE("min-max totals") {
  const auto n = min_max_normalize({3.0, -1.0, 5.0, 1.0});
  CHECK(n == std::vector<double>{2.0 / 3.0, 0.0, 1.0, 1.0 / 3.0});
  CHECK(min_max_normalize({2.0, 2.0, 2.0}) == std::vector<double>{0.5, 0.5, 0.5});

  const RewardWeights w;
  auto b = total_reward({{"creativity", w.creativity, {1, 0}},
                         {"stability", w.stability, {0, -1}},
                         {"comp_diversity", w.comp_diversity, {5, 1}},
                         {"struct_diversity", w.struct_diversity, {2, 1}}});
  CHECK(b.total[0] == doctest::Approx(3.1).epsilon(1e-15));
  CHECK(b.total[1] == 0.0);
  auto flat = total_reward({{"creativity", 1.0, {1, 1, 1}}, {"stability", 2.0, {0, 1, 2}}});
  CHECK(flat.total == std::vector<double>{0.5, 1.5, 2.5});
  CHECK(flat.raw_mean("stability").value() == 1.0);
  CHECK_FALSE(flat.raw_mean("bandgap").has_value());
  CHECK_THROWS_AS(total_reward({{"a", 1.0, {1, 2}}, {"b", 1.0, {1}}}), std::invalid_argument);

  RngStream rng(8, "argmax");
  for (int round = 0; round < 100; ++round) {
    std::vector<RewardComponent> comps, scaled;
    for (int c = 0; c < 4; ++c) {
      std::vector<double> raw(16);
      for (auto& v : raw) v = rng.normal();
      const double a = 0.1 + 10 * rng.uniform(), shift = rng.normal() * 5;
      std::vector<double> moved = raw;
      for (auto& v : moved) v = a * v + shift;
      const double weight = rng.uniform();
      comps.push_back({"c", weight, raw});
      scaled.push_back({"c", weight, moved});
    }
    const auto t1 = total_reward(comps).total, t2 = total_reward(scaled).total;
    CHECK(std::max_element(t1.begin(), t1.end()) - t1.begin() == std::max_element(t2.begin(), t2.end()) - t2.begin());
  }
}

TEST_CASE("surrogate regression") {
  RngStream rng(9, "surrogate");
  const std::size_t n = 400;
  const Tensor x = random_rows(rng, n, 4);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = 2.0 + std::sin(x.at(i, 0)) + 0.5 * x.at(i, 1) * x.at(i, 1);
  SurrogateConfig cfg;
  cfg.seed = 2;
  cfg.max_steps = 1500;
  const auto a = train_surrogate(x, y, cfg);
  const auto b = train_surrogate(x, y, cfg);
  CHECK(a.model.params() == b.model.params());
  CHECK(a.report.val_mae < 0.75 * a.report.baseline_mae);
  CHECK(a.report.train_mae > 0.0);
  CHECK(a.val_idx.size() == 40);
  const auto preds = a.model.predict(x);
  CHECK(preds[3] == doctest::Approx(a.model.predict(x.row(3))).epsilon(1e-12));
  CHECK_THROWS(Surrogate().predict(x));
  CHECK_THROWS_AS(train_surrogate(x, std::vector<double>(3, 0.0), cfg), std::invalid_argument);
}

TEST_CASE("reward model batch evaluation") {
  const auto corpus = crystal::crystals_of(crystal::gen_corpus(10, 60));
  vae::VaeConfig vc;
  vc.hidden = 16;
  vc.atom_hidden = 8;
  const vae::Vae model(vc, 1);
  const oracle::ElementTable table;
  oracle::StabilityOracle stab{table, oracle::HullReferenceSet::from_crystals(corpus, table)};
  const RewardModel rm(model, stab, corpus, RewardOptions{});
  std::vector<crystal::Crystal> batch(corpus.begin(), corpus.begin() + 6);
  batch.push_back(simple_cubic(7.1, 11));
  batch.push_back(batch[0]);
  const auto ev = rm.evaluate(batch);
  REQUIRE(ev.breakdown.names.size() == 4);
  CHECK(ev.breakdown.size() == batch.size());
  CHECK(ev.breakdown.raw[0][0] == 0.0);
  CHECK(ev.breakdown.raw[0][6] == 1.0);
  for (std::size_t i = 0; i < 6; ++i) CHECK(ev.e_hull[i] == stab.evaluate(batch[i]).e_hull);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(ev.breakdown.raw[1][i] == r_stability(ev.e_hull[i]));
    double expected = 0.0;
    for (std::size_t c = 0; c < 4; ++c) expected += ev.breakdown.weights[c] * ev.breakdown.normalized[c][i];
    CHECK(ev.breakdown.total[i] == doctest::Approx(expected).epsilon(1e-12));
  }
  RewardOptions off;
  off.diversity = false;
  CHECK(RewardModel(model, stab, corpus, off).evaluate(batch).breakdown.names.size() == 2);
  RewardOptions prop;
  prop.mode = RewardMode::Property;
  CHECK_THROWS_AS(RewardModel(model, stab, corpus, prop), std::invalid_argument);
}
