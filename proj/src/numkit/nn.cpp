#include "crl/numkit/nn.hpp"

#include <cmath>

namespace crl::nk {

void init_linear(ParamSet& params, const std::string& name, std::size_t in, std::size_t out, RngStream& rng,
                 double gain) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(in + out));
  Tensor w(Shape{in, out});
  for (double& v : w.data()) v = (2.0 * rng.uniform() - 1.0) * bound;
  params[name + ".w"] = std::move(w);
  params[name + ".b"] = Tensor::zeros(Shape{out});
}

void init_layer_norm(ParamSet& params, const std::string& name, std::size_t width) {
  params[name + ".g"] = Tensor::full(Shape{width}, 1.0);
  params[name + ".b"] = Tensor::zeros(Shape{width});
}

void init_embedding(ParamSet& params, const std::string& name, std::size_t rows, std::size_t width, RngStream& rng,
                    double stddev) {
  Tensor t(Shape{rows, width});
  for (double& v : t.data()) v = stddev * rng.normal();
  params[name] = std::move(t);
}

Var linear(Tape& tape, const ParamSet& params, const std::string& name, Var x) {
  Var w = tape.param(params, name + ".w");
  Var b = tape.param(params, name + ".b");
  return add(matmul(x, w), b);
}

Var layer_norm(Tape& tape, const ParamSet& params, const std::string& name, Var x, double eps) {
  Var mu = row_mean(x);
  Var centered = sub(x, mu);
  Var var = row_mean(square(centered));
  Var normed = div(centered, sqrt(add_scalar(var, eps)));
  return add(mul(normed, tape.param(params, name + ".g")), tape.param(params, name + ".b"));
}

Tensor sinusoidal_embedding(const std::vector<double>& t, std::size_t width, double max_period) {
  const std::size_t half = width / 2;
  Tensor out(Shape{t.size(), width});
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t k = 0; k < half; ++k) {
      const double freq = std::exp(-std::log(max_period) * static_cast<double>(k) / static_cast<double>(half));
      out.at(i, k) = std::sin(t[i] * freq);
      out.at(i, half + k) = std::cos(t[i] * freq);
    }
  }
  return out;
}

std::size_t parameter_count(const ParamSet& params) {
  std::size_t n = 0;
  for (const auto& [_, t] : params) n += t.size();
  return n;
}

}  // namespace crl::nk
