#include <doctest.h>

#include <cmath>
#include <numbers>

#include "crl/diffusion/sampler.hpp"
#include "crl/diffusion/train.hpp"

using namespace crl;
using namespace crl::diffusion;
using crl::nk::RngStream;
using crl::nk::Tape;
using crl::nk::Tensor;

namespace {

DenoiserConfig tiny_config(std::size_t d = 2) {
  DenoiserConfig cfg;
  cfg.latent_dim = d;
  cfg.time_embed = 4;
  cfg.cond_embed = 3;
  cfg.hidden = 5;
  cfg.blocks = 1;
  return cfg;
}

// Exact E[eps | z_t] when z0 ~ N(mean, diag(sd²)).
EpsFn gaussian_optimal_eps(const DiffusionSchedule& sched, std::vector<double> mean, std::vector<double> sd) {
  return [&sched, mean, sd](const Tensor& z, std::size_t t, const std::vector<Condition>&) {
    const double ab = sched.alpha_bars[t];
    Tensor out(z.shape());
    for (std::size_t i = 0; i < z.rows(); ++i) {
      for (std::size_t k = 0; k < z.cols(); ++k) {
        const double var = ab * sd[k] * sd[k] + 1.0 - ab;
        out.at(i, k) = std::sqrt(1.0 - ab) * (z.at(i, k) - std::sqrt(ab) * mean[k]) / var;
      }
    }
    return out;
  };
}

std::vector<Condition> conditions(std::size_t n, int n_atoms = 2) { return std::vector<Condition>(n, Condition{n_atoms, {}}); }

void check_moments(const Tensor& z, const std::vector<double>& mean, const std::vector<double>& sd) {
  for (std::size_t k = 0; k < z.cols(); ++k) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) m += z.at(i, k);
    m /= static_cast<double>(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) v += (z.at(i, k) - m) * (z.at(i, k) - m);
    v /= static_cast<double>(z.rows() - 1);
    CHECK(std::abs(m - mean[k]) < 0.05 * sd[k]);
    CHECK(v == doctest::Approx(sd[k] * sd[k]).epsilon(0.05));
  }
}

}  // namespace

TEST_CASE("schedule") {
  const auto s = make_schedule();
  CHECK(s.T == 1000);
  CHECK(s.betas[1] == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(s.betas[1000] == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(s.alpha_bars[0] == 1.0);
  CHECK(s.alpha_bars[1000] < 1e-4);
  double prod = 1.0;
  for (std::size_t t = 1; t <= 1000; ++t) {
    prod *= 1.0 - (1e-4 + (0.02 - 1e-4) * static_cast<double>(t - 1) / 999.0);
    CHECK(s.alpha_bars[t] == doctest::Approx(prod).epsilon(1e-12));
    CHECK(s.alpha_bars[t] < s.alpha_bars[t - 1]);
    CHECK(s.alphas[t] == doctest::Approx(1.0 - s.betas[t]).epsilon(1e-15));
  }
  CHECK_THROWS(make_schedule(1));

  const auto steps = step_subsequence(1000, 50);
  REQUIRE(steps.size() == 50);
  CHECK(steps.front() == 1000);
  CHECK(steps.back() >= 1);
  for (std::size_t k = 1; k < steps.size(); ++k) CHECK(steps[k] < steps[k - 1]);
  CHECK(step_subsequence(1000, 1000).back() == 1);
  CHECK(step_subsequence(1000, 1) == std::vector<std::size_t>{1000});
  CHECK_THROWS(step_subsequence(10, 11));
  CHECK(transition_sigma(s, 20, 0, 1.0) == 0.0);
  CHECK(transition_sigma(s, 20, 19, 0.0) == 0.0);
  // Adjacent steps with eta = 1 give the DDPM posterior variance.
  const double post = s.betas[20] * (1 - s.alpha_bars[19]) / (1 - s.alpha_bars[20]);
  CHECK(transition_sigma(s, 20, 19, 1.0) == doctest::Approx(std::sqrt(post)).epsilon(1e-12));
}

TEST_CASE("forward process") {
  const auto s = make_schedule();
  RngStream rng(1, "q");
  const Tensor z0 = rng.normal({4, 3});
  const Tensor eps = rng.normal({4, 3});
  const auto zero_t = q_sample(z0, {0, 0, 0, 0}, eps, s);
  CHECK(zero_t == z0);
  const auto noiseless = q_sample(z0, {1, 10, 500, 1000}, Tensor::zeros({4, 3}), s);
  const std::vector<std::size_t> ts{1, 10, 500, 1000};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 3; ++k) CHECK(noiseless.at(i, k) == doctest::Approx(std::sqrt(s.alpha_bars[ts[i]]) * z0.at(i, k)));
  // One-step kernel iterated: scale and variance recursions reproduce the closed form.
  double scale = 1.0, var = 0.0;
  for (std::size_t t = 1; t <= 1000; ++t) {
    scale *= std::sqrt(1.0 - s.betas[t]);
    var = (1.0 - s.betas[t]) * var + s.betas[t];
    CHECK(std::abs(scale - std::sqrt(s.alpha_bars[t])) < 1e-9);
    CHECK(std::abs(var - (1.0 - s.alpha_bars[t])) < 1e-9);
  }
}

TEST_CASE("ddpm loss") {
  const auto s = make_schedule();
  Denoiser zero(DenoiserConfig{}, 2);
  for (auto& v : zero.params().at("den.out.w").data()) v = 0.0;
  for (auto& v : zero.params().at("den.out.b").data()) v = 0.0;
  RngStream data(3, "ddpm-data");
  const Tensor z0 = data.normal({20000, 8});
  {
    RngStream stream(4, "ddpm");
    Tape tape(false);
    const double loss = ddpm_loss(tape, zero, zero.params(), z0, conditions(20000), s, stream).value().item();
    CHECK(loss == doctest::Approx(8.0).epsilon(0.02));
  }

  const Denoiser model(tiny_config(), 5);
  const Tensor small = data.normal({6, 2});
  std::vector<Condition> cond = conditions(6);
  cond[1].property = 2.0;
  auto eval = [&](const nk::ParamSet& p) {
    RngStream stream(6, "ddpm-fd");
    Tape tape(false);
    return ddpm_loss(tape, model, p, small, cond, s, stream).value().item();
  };
  CHECK(eval(model.params()) == eval(model.params()));
  RngStream stream(6, "ddpm-fd");
  Tape tape;
  auto loss = ddpm_loss(tape, model, model.params(), small, cond, s, stream);
  const auto grads = tape.gradient(loss, model.params());
  nk::ParamSet params = model.params();
  double diff = 0.0, norm = 0.0;
  for (auto& [name, value] : params) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double orig = value[i];
      value[i] = orig + 1e-6;
      const double up = eval(params);
      value[i] = orig - 1e-6;
      const double down = eval(params);
      value[i] = orig;
      const double fd = (up - down) / 2e-6;
      diff += std::pow(fd - grads.at(name)[i], 2);
      norm += fd * fd;
    }
  }
  CHECK(std::sqrt(diff / norm) < 1e-4);
}

TEST_CASE("ddim sampler") {
  const auto s = make_schedule();
  const Denoiser model(tiny_config(), 7);
  RngStream rng(8, "ddim");
  const Tensor zT = rng.normal({5, 2});
  const auto cond = conditions(5);
  const auto a = ddim_sample(model, s, cond, 50, zT);
  const auto b = ddim_sample(model, s, cond, 50, zT);
  CHECK(a == b);

  const auto one = ddim_sample(model, s, cond, 1, zT);
  const Tensor eps = model.predict(zT, std::vector<std::size_t>(5, 1000), cond);
  const double ab = s.alpha_bars[1000];
  for (std::size_t i = 0; i < one.size(); ++i)
    CHECK(one[i] == doctest::Approx((zT[i] - std::sqrt(1 - ab) * eps[i]) / std::sqrt(ab)).epsilon(1e-12));
}

TEST_CASE("samplers recover Gaussian data under the optimal denoiser") {
  const auto s = make_schedule();
  const std::vector<double> mean{0.5, -1.0}, sd{0.7, 1.3};
  const auto eps = gaussian_optimal_eps(s, mean, sd);
  const std::size_t n = 10000;
  RngStream rng(9, "gauss");
  check_moments(ddim_sample(eps, s, conditions(n), 1000, rng.normal({n, 2})), mean, sd);

  std::vector<RngStream> streams;
  for (std::size_t i = 0; i < n; ++i) streams.emplace_back(10, "gauss-anc", i);
  const auto traj = ancestral_sample_with_logprob(eps, 2, s, conditions(n), 1000, streams);
  Tensor z0({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = traj[i].z0();
    z0.at(i, 0) = row[0];
    z0.at(i, 1) = row[1];
  }
  check_moments(z0, mean, sd);
}

TEST_CASE("ancestral transitions have the scheduled variance") {
  const auto s = make_schedule();
  const auto eps = gaussian_optimal_eps(s, {0.3}, {0.8});
  const std::size_t n = 10000;
  std::vector<RngStream> streams;
  for (std::size_t i = 0; i < n; ++i) streams.emplace_back(11, "mc-var", i);
  const auto traj = ancestral_sample_with_logprob(eps, 1, s, conditions(n), 50, streams);
  for (std::size_t k : {0, 10, 25, 48}) {
    const std::size_t t = traj[0].steps[k], tp = traj[0].t_prev(k);
    const auto c = transition_coefs(s, t, tp, 1.0);
    Tensor zt({n, 1});
    for (std::size_t i = 0; i < n; ++i) zt.at(i, 0) = traj[i].states.at(k, 0);
    const Tensor e = eps(zt, t, conditions(n));
    double m = 0.0, v = 0.0;
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = traj[i].states.at(k + 1, 0) - (c.a * zt.at(i, 0) + c.b * e.at(i, 0));
      m += r[i];
    }
    m /= n;
    for (double x : r) v += (x - m) * (x - m);
    v /= n - 1;
    CHECK(v == doctest::Approx(c.sigma * c.sigma).epsilon(0.03));
  }
}

TEST_CASE("trajectory log-probabilities") {
  const auto s = make_schedule();
  const Denoiser model(tiny_config(3), 12);
  std::vector<Condition> cond = conditions(4, 3);
  cond[2].property = 1.5;
  std::vector<RngStream> streams;
  for (std::size_t i = 0; i < 4; ++i) streams.emplace_back(13, "lp", i);
  const auto traj = ancestral_sample_with_logprob(model, s, cond, 50, streams);
  double first_sum = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& tr = traj[i];
    REQUIRE(tr.logprobs.size() == 50);
    REQUIRE(tr.states.rows() == 51);
    CHECK(tr.logprobs.back() == 0.0);
    double sum = 0.0;
    Tensor zt({49, 3}), zp({49, 3});
    std::vector<std::size_t> t, tp;
    for (std::size_t k = 0; k + 1 < 50; ++k) {
      const double lp = transition_logprob(tr.states.row(k + 1), tr.states.row(k), tr.steps[k], tr.t_prev(k), tr.cond,
                                           model, model.params(), s);
      CHECK(std::abs(lp - tr.logprobs[k]) < 1e-9);
      sum += tr.logprobs[k];
      for (std::size_t j = 0; j < 3; ++j) {
        zt.at(k, j) = tr.states.at(k, j);
        zp.at(k, j) = tr.states.at(k + 1, j);
      }
      t.push_back(tr.steps[k]);
      tp.push_back(tr.t_prev(k));
    }
    Tape tape(false);
    const auto batched = transition_logprob(tape, model, model.params(), zt, zp, t, tp,
                                            std::vector<Condition>(49, tr.cond), s).value();
    for (std::size_t k = 0; k < 49; ++k) CHECK(std::abs(batched.at(k, 0) - tr.logprobs[k]) < 1e-9);
    CHECK(std::isfinite(sum));
    if (i == 0) first_sum = sum;
    if (i == 1) CHECK(sum != first_sum);
  }
  CHECK_THROWS(transition_logprob(traj[0].states.row(50), traj[0].states.row(49), traj[0].steps[49], 0, cond[0], model,
                                  model.params(), s));
}

TEST_CASE("transition density") {
  const auto s = make_schedule();
  const Denoiser model(tiny_config(1), 14);
  const std::vector<double> zt{0.4};
  const Condition cond{2, {}};
  const std::size_t t = 500, tp = 480;
  const auto c = transition_coefs(s, t, tp, 1.0);
  const double eps = model.predict(Tensor::matrix(1, 1, zt), {t}, {cond})[0];
  const double mean = c.a * zt[0] + c.b * eps;
  auto lp = [&](double x) { return transition_logprob({x}, zt, t, tp, cond, model, model.params(), s); };
  CHECK(lp(mean) == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi * c.sigma * c.sigma)).epsilon(1e-12));
  CHECK(lp(mean + 0.01) == doctest::Approx(lp(mean - 0.01)).epsilon(1e-12));
  // Simpson's rule over ±10 sigma.
  const std::size_t m = 4000;
  const double lo = mean - 10 * c.sigma, h = 20 * c.sigma / m;
  double mass = 0.0, first = 0.0;
  for (std::size_t i = 0; i <= m; ++i) {
    const double x = lo + h * i;
    const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    mass += w * std::exp(lp(x));
    first += w * x * std::exp(lp(x));
  }
  CHECK(std::abs(mass * h / 3 - 1.0) < 1e-6);
  CHECK(std::abs(first * h / 3 - mean) < 1e-6);
}

TEST_CASE("classifier-free guidance") {
  RngStream rng(15, "cfg");
  const Tensor ec = rng.normal({3, 4}), en = rng.normal({3, 4});
  CHECK(guided_eps(ec, en, 0.0) == en);
  CHECK(guided_eps(ec, en, 1.0) == ec);
  const auto two = guided_eps(ec, en, 2.0);
  for (std::size_t i = 0; i < two.size(); ++i) CHECK(std::abs(two[i] - (en[i] + 2 * (ec[i] - en[i]))) < 1e-12);

  const Denoiser model(tiny_config(), 16);
  std::vector<Condition> cond{{2, 3.0}, {4, 1.0}};
  const Tensor z = rng.normal({2, 2});
  const std::vector<std::size_t> ts{700, 700};
  const Tensor e_cond = model.predict(z, ts, cond), e_null = model.predict(z, ts, without_property(cond));
  CHECK(e_cond != e_null);
  const auto eps = eps_fn(model, 2.0)(z, 700, cond);
  for (std::size_t i = 0; i < eps.size(); ++i) CHECK(std::abs(eps[i] - (e_null[i] + 2 * (e_cond[i] - e_null[i]))) < 1e-12);
  CHECK(eps_fn(model, 0.0)(z, 700, cond) == e_null);
  CHECK(eps_fn(model, 1.0)(z, 700, cond) == e_cond);
  Tape tape(false);
  const auto v = guided_eps(tape.constant(e_cond), tape.constant(e_null), 2.0).value();
  CHECK(v == guided_eps(e_cond, e_null, 2.0));
}

TEST_CASE("latent standardization and training") {
  RngStream rng(17, "stats");
  Tensor z = rng.normal({200, 3});
  for (std::size_t i = 0; i < 200; ++i) {
    z.at(i, 0) = 3 + 2 * z.at(i, 0);
    z.at(i, 2) *= 0.1;
  }
  const auto stats = fit_latent_stats(z);
  const auto n = stats.normalize(z);
  for (std::size_t k = 0; k < 3; ++k) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 200; ++i) m += n.at(i, k);
    m /= 200;
    for (std::size_t i = 0; i < 200; ++i) v += (n.at(i, k) - m) * (n.at(i, k) - m);
    CHECK(std::abs(m) < 1e-12);
    CHECK(v / 200 == doctest::Approx(1.0).epsilon(1e-9));
  }
  const auto back = stats.denormalize(n);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(back[i] == doctest::Approx(z[i]).epsilon(1e-12));

  LatentDataset data{n, conditions(200)};
  LdmTrainConfig cfg;
  cfg.seed = 3;
  cfg.batch_size = 32;
  cfg.max_steps = 200;
  cfg.log_every = 100;
  const auto sched = make_schedule();
  const auto a = train_ldm(data, tiny_config(3), cfg, sched);
  const auto b = train_ldm(data, tiny_config(3), cfg, sched);
  CHECK(a.model.params() == b.model.params());
  REQUIRE(a.log.size() == 2);
  CHECK(a.log.back().loss < a.log.front().loss);
}
