#include <doctest.h>

#include <cmath>
#include <functional>

#include "crl/numkit/autodiff.hpp"
#include "crl/numkit/linalg.hpp"
#include "crl/numkit/nn.hpp"
#include "crl/numkit/rng.hpp"
#include "oracles.hpp"

using namespace crl::nk;
using crl::testing::finite_difference;
using crl::testing::relative_error;

namespace {

Tensor random_tensor(RngStream& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

using LossBuilder = std::function<Var(Tape&, const ParamSet&)>;

double grad_check(const LossBuilder& build, const ParamSet& params) {
  Tape tape;
  Var loss = build(tape, params);
  const GradMap grads = tape.gradient(loss, params);
  auto eval = [&](const ParamSet& p) {
    Tape t(false);
    return build(t, p).value().item();
  };
  double worst = 0.0;
  for (const auto& [name, _] : params) {
    worst = std::max(worst, relative_error(grads.at(name), finite_difference(eval, params, name)));
  }
  return worst;
}

}  // namespace

TEST_CASE("gradient of sum is all ones") {
  Tape tape;
  Var p = tape.param("p", Tensor::vector({0.3, -2.0, 5.0}));
  const GradMap g = tape.gradient(sum(p));
  CHECK(g.at("p") == Tensor::vector({1.0, 1.0, 1.0}));
}

TEST_CASE("gradient of sum of squares") {
  Tape tape;
  Var p = tape.param("p", Tensor::vector({2.0, -1.0}));
  const GradMap g = tape.gradient(sum(mul(p, p)));
  CHECK(g.at("p")[0] == doctest::Approx(4.0));
  CHECK(g.at("p")[1] == doctest::Approx(-2.0));
}

TEST_CASE("two-layer network matches central differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RngStream rng(seed, "two-layer");
    ParamSet params;
    init_linear(params, "l1", 4, 6, rng);
    init_linear(params, "l2", 6, 3, rng);
    for (auto& [_, t] : params)
      for (double& v : t.data()) v += 0.1 * rng.normal();
    const Tensor x = random_tensor(rng, {5, 4});
    const Tensor y = random_tensor(rng, {5, 3});
    LossBuilder build = [&](Tape& tape, const ParamSet& p) {
      Var h = tanh(linear(tape, p, "l1", tape.constant(x)));
      Var out = linear(tape, p, "l2", h);
      return mean(square(sub(out, tape.constant(y))));
    };
    CHECK(grad_check(build, params) < 1e-4);
  }
}

TEST_CASE("unused parameters get zero gradients") {
  ParamSet params{{"a", Tensor::vector({1.0, 2.0})}, {"b", Tensor::vector({3.0})}};
  Tape tape;
  Var a = tape.param(params, "a");
  tape.param(params, "b");
  const GradMap g = tape.gradient(sum(a), params);
  CHECK(g.at("b") == Tensor::zeros({1}));
  ParamSet more = params;
  more["c"] = Tensor::zeros({2, 2});
  CHECK(tape.gradient(sum(a), more).at("c") == Tensor::zeros({2, 2}));
}

TEST_CASE("shape mismatch names both nodes") {
  Tape tape;
  Var a = tape.param("a", Tensor::zeros({2, 3}));
  Var b = tape.param("b", Tensor::zeros({4}));
  try {
    add(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("param:a") != std::string::npos);
    CHECK(msg.find("param:b") != std::string::npos);
  }
  CHECK_THROWS_AS(matmul(a, tape.param("c", Tensor::zeros({2, 2}))), ShapeError);
}

TEST_CASE("non-scalar loss is rejected") {
  Tape tape;
  Var a = tape.param("a", Tensor::zeros({3}));
  CHECK_THROWS_AS(tape.gradient(a), ShapeError);
}

TEST_CASE("every primitive op matches central differences over 100 seeds") {
  struct OpCase {
    const char* name;
    std::function<Var(Tape&, Var, Var)> op;  // x is (3,4), y is (3,4)
    double lo, hi;
  };
  const std::vector<OpCase> cases = {
      {"add", [](Tape&, Var x, Var y) { return add(x, y); }, -1, 1},
      {"add_row_bcast", [](Tape&, Var x, Var y) { return add(x, slice_rows(y, 0, 1)); }, -1, 1},
      {"sub_col_bcast", [](Tape&, Var x, Var y) { return sub(x, slice_cols(y, 1, 2)); }, -1, 1},
      {"mul", [](Tape&, Var x, Var y) { return mul(x, y); }, -1, 1},
      {"div", [](Tape&, Var x, Var y) { return div(x, add_scalar(square(y), 0.5)); }, -1, 1},
      {"minimum", [](Tape&, Var x, Var y) { return minimum(x, add_scalar(y, 0.05)); }, -1, 1},
      {"matmul", [](Tape&, Var x, Var y) { return matmul(x, reshape(y, {4, 3})); }, -1, 1},
      {"exp", [](Tape&, Var x, Var) { return exp(x); }, -1, 1},
      {"log", [](Tape&, Var x, Var) { return log(x); }, 0.2, 2},
      {"sqrt", [](Tape&, Var x, Var) { return sqrt(x); }, 0.2, 2},
      {"tanh", [](Tape&, Var x, Var) { return tanh(x); }, -2, 2},
      {"relu", [](Tape&, Var x, Var) { return relu(x); }, 0.1, 1},
      {"sigmoid", [](Tape&, Var x, Var) { return sigmoid(x); }, -3, 3},
      {"softplus", [](Tape&, Var x, Var) { return softplus(x); }, -3, 3},
      {"silu", [](Tape&, Var x, Var) { return silu(x); }, -3, 3},
      {"clamp", [](Tape&, Var x, Var) { return clamp(x, -0.8, 0.8); }, -0.7, 0.7},
      {"wrap", [](Tape&, Var x, Var) { return wrap_periodic(x); }, 0.1, 0.4},
      {"square", [](Tape&, Var x, Var) { return square(x); }, -1, 1},
      {"row_sum", [](Tape&, Var x, Var) { return row_sum(x); }, -1, 1},
      {"row_mean", [](Tape&, Var x, Var) { return row_mean(x); }, -1, 1},
      {"col_sum", [](Tape&, Var x, Var) { return col_sum(x); }, -1, 1},
      {"col_mean", [](Tape&, Var x, Var) { return col_mean(x); }, -1, 1},
      {"broadcast", [](Tape&, Var x, Var) { return broadcast_to(slice_rows(x, 1, 2), {3, 4}); }, -1, 1},
      {"slice_cols", [](Tape&, Var x, Var) { return slice_cols(x, 1, 3); }, -1, 1},
      {"concat_cols", [](Tape&, Var x, Var y) { return concat_cols({x, y}); }, -1, 1},
      {"concat_rows", [](Tape&, Var x, Var y) { return concat_rows({x, y}); }, -1, 1},
      {"gather", [](Tape&, Var x, Var) { return gather_rows(x, {2, 0, 2, 1}); }, -1, 1},
      {"softmax", [](Tape&, Var x, Var) { return softmax_rows(x); }, -2, 2},
      {"log_softmax", [](Tape&, Var x, Var) { return log_softmax_rows(x); }, -2, 2},
      {"mean", [](Tape&, Var x, Var) { return mean(x); }, -1, 1},
  };
  for (const auto& c : cases) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      RngStream rng(seed, c.name);
      ParamSet params{{"x", random_tensor(rng, {3, 4}, c.lo, c.hi)}, {"y", random_tensor(rng, {3, 4}, c.lo, c.hi)}};
      // Project the output on random weights so every output entry matters.
      Tape probe(false);
      const Shape out_shape =
          c.op(probe, probe.param(params, "x"), probe.param(params, "y")).shape();
      const Tensor weights = random_tensor(rng, out_shape);
      LossBuilder build = [&](Tape& tape, const ParamSet& p) {
        Var out = c.op(tape, tape.param(p, "x"), tape.param(p, "y"));
        return sum(mul(out, tape.constant(weights)));
      };
      worst = std::max(worst, grad_check(build, params));
    }
    INFO("op " << c.name << " worst relative error " << worst);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("eigh examples") {
  auto e1 = eigh(Tensor::identity(3));
  for (int i = 0; i < 3; ++i) CHECK(e1.eigenvalues[i] == doctest::Approx(1.0));
  auto e2 = eigh(Tensor::matrix({{3, 0}, {0, 1}}));
  CHECK(e2.eigenvalues[0] == doctest::Approx(1.0));
  CHECK(e2.eigenvalues[1] == doctest::Approx(3.0));
  auto e3 = eigh(Tensor::matrix({{2, 1}, {1, 2}}));
  CHECK(e3.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e3.eigenvalues[1] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_THROWS_AS(eigh(Tensor::matrix({{1, 2}, {0, 1}})), LinalgError);
}

TEST_CASE("eigh reconstructs random symmetric matrices up to 32x32") {
  RngStream rng(11, "eigh");
  for (std::size_t n : {1, 2, 3, 5, 8, 16, 32}) {
    for (int trial = 0; trial < 3; ++trial) {
      Tensor a = random_tensor(rng, {n, n});
      Tensor m = matmul(a, a.transposed());
      for (std::size_t i = 0; i < n; ++i) m.at(i, i) -= 1.0;  // indefinite
      const EighResult e = eigh(m);
      Tensor vd = e.eigenvectors;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) vd.at(i, k) *= e.eigenvalues[k];
      CHECK(max_abs_diff(matmul_nt(vd, e.eigenvectors), m) < 1e-8);
      CHECK(max_abs_diff(matmul_tn(e.eigenvectors, e.eigenvectors), Tensor::identity(n)) < 1e-8);
      for (std::size_t k = 1; k < n; ++k) CHECK(e.eigenvalues[k - 1] <= e.eigenvalues[k]);
    }
  }
}

TEST_CASE("sqrtm_psd examples and self-consistency") {
  CHECK(max_abs_diff(sqrtm_psd(Tensor::identity(3)), Tensor::identity(3)) < 1e-12);
  CHECK(max_abs_diff(sqrtm_psd(Tensor::matrix({{4, 0}, {0, 9}})), Tensor::matrix({{2, 0}, {0, 3}})) < 1e-12);
  CHECK_THROWS_AS(sqrtm_psd(Tensor::matrix({{1, 0}, {0, -1e-6}})), LinalgError);
  CHECK_NOTHROW(sqrtm_psd(Tensor::matrix({{1, 0}, {0, -1e-12}})));
  RngStream rng(5, "sqrtm");
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    const Tensor a = random_tensor(rng, {n + rng.below(3), n});
    const Tensor m = matmul_tn(a, a);
    const Tensor r = sqrtm_psd(m);
    Tensor diff = matmul(r, r);
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= m[i];
    CHECK(frobenius(diff) < 1e-7);
  }
}

TEST_CASE("random streams are keyed and deterministic") {
  RngStream a(42, "noise", 3), b(42, "noise", 3), c(42, "noise", 4), d(42, "other", 3);
  const Tensor ta = a.normal({64});
  CHECK(ta == b.normal({64}));
  CHECK(!(ta == c.normal({64})));
  CHECK(!(ta == d.normal({64})));

  RngStream s(1, "moments");
  const Tensor x = s.normal({100000});
  double mean = 0.0, var = 0.0;
  for (double v : x.data()) mean += v;
  mean /= 1e5;
  for (double v : x.data()) var += (v - mean) * (v - mean);
  var /= 1e5;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("child streams do not consume parent draws") {
  RngStream a(9, "parent"), b(9, "parent");
  (void)a.child("x", 1).normal();
  CHECK(a.next_u64() == b.next_u64());
}
