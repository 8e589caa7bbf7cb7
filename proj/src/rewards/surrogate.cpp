#include "crl/rewards/surrogate.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "crl/numkit/nn.hpp"
#include "crl/numkit/optim.hpp"
#include "crl/vae/train.hpp"

namespace crl::rewards {

using namespace crl::nk;

namespace {

std::string layer_name(std::size_t i) { return "sur.l" + std::to_string(i); }

Tensor rows_of(const Tensor& x, const std::vector<std::size_t>& idx) {
  Tensor out({idx.size(), x.cols()});
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) = x.at(idx[r], c);
  return out;
}

std::vector<double> values_of(const std::vector<double>& y, const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  for (auto i : idx) out.push_back(y[i]);
  return out;
}

}  // namespace

Surrogate::Surrogate(ParamSet params) : params_(std::move(params)) {
  while (params_.count(layer_name(layers_) + ".w")) ++layers_;
  if (layers_ < 2 || !params_.count("sur.x_mean") || !params_.count("sur.y_std")) {
    throw std::invalid_argument("Surrogate: incomplete parameter set");
  }
}

std::size_t Surrogate::input_dim() const { return trained() ? params_.at("sur.x_mean").cols() : 0; }

Var Surrogate::forward(Tape& tape, const ParamSet& params, Var x_std) const {
  Var h = x_std;
  for (std::size_t i = 0; i + 1 < layers_; ++i) h = silu(linear(tape, params, layer_name(i), h));
  return linear(tape, params, layer_name(layers_ - 1), h);
}

std::vector<double> Surrogate::predict(const Tensor& x) const {
  if (!trained()) throw std::logic_error("Surrogate: not trained");
  if (x.cols() != input_dim()) throw ShapeError("Surrogate: input width mismatch");
  const Tensor& xm = params_.at("sur.x_mean");
  const Tensor& xs = params_.at("sur.x_std");
  Tensor xn(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) xn.at(r, c) = (x.at(r, c) - xm.at(0, c)) / xs.at(0, c);
  Tape tape(false);
  const Tensor out = forward(tape, params_, tape.constant(xn)).value();
  std::vector<double> y(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r)
    y[r] = params_.at("sur.y_mean").item() + params_.at("sur.y_std").item() * out.at(r, 0);
  return y;
}

double Surrogate::predict(const std::vector<double>& x) const {
  return predict(Tensor::matrix(1, x.size(), x))[0];
}

double mean_abs_error(const std::vector<double>& pred, const std::vector<double>& y) {
  if (pred.size() != y.size() || y.empty()) throw std::invalid_argument("mean_abs_error: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(pred[i] - y[i]);
  return s / static_cast<double>(y.size());
}

SurrogateResult train_surrogate(const Tensor& x, const std::vector<double>& y, const SurrogateConfig& cfg) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n != y.size() || n < 10) throw std::invalid_argument("train_surrogate: need at least 10 labelled rows");
  SurrogateResult res;
  std::tie(res.train_idx, res.val_idx) = vae::split_indices(n, cfg.val_fraction, cfg.seed);
  const Tensor x_tr = rows_of(x, res.train_idx), x_val = rows_of(x, res.val_idx);
  const std::vector<double> y_tr = values_of(y, res.train_idx), y_val = values_of(y, res.val_idx);

  Tensor x_mean({1, d}), x_std({1, d});
  for (std::size_t c = 0; c < d; ++c) {
    double m = 0.0, v = 0.0;
    for (std::size_t r = 0; r < x_tr.rows(); ++r) m += x_tr.at(r, c);
    m /= static_cast<double>(x_tr.rows());
    for (std::size_t r = 0; r < x_tr.rows(); ++r) v += (x_tr.at(r, c) - m) * (x_tr.at(r, c) - m);
    x_mean.at(0, c) = m;
    x_std.at(0, c) = std::max(std::sqrt(v / static_cast<double>(x_tr.rows())), 1e-8);
  }
  double y_mean = 0.0, y_var = 0.0;
  for (double v : y_tr) y_mean += v;
  y_mean /= static_cast<double>(y_tr.size());
  for (double v : y_tr) y_var += (v - y_mean) * (v - y_mean);
  const double y_std = std::max(std::sqrt(y_var / static_cast<double>(y_tr.size())), 1e-8);

  RngStream init(cfg.seed, "surrogate.init");
  ParamSet weights;
  std::size_t in = d;
  for (std::size_t i = 0; i < cfg.layers; ++i) {
    init_linear(weights, layer_name(i), in, cfg.hidden, init);
    in = cfg.hidden;
  }
  init_linear(weights, layer_name(cfg.layers), in, 1, init);
  auto with_stats = [&](const ParamSet& w) {
    ParamSet p = w;
    p["sur.x_mean"] = x_mean;
    p["sur.x_std"] = x_std;
    p["sur.y_mean"] = Tensor::matrix(1, 1, {y_mean});
    p["sur.y_std"] = Tensor::matrix(1, 1, {y_std});
    return p;
  };
  Surrogate shape(with_stats(weights));

  Tensor xn(x_tr.shape());
  for (std::size_t r = 0; r < x_tr.rows(); ++r)
    for (std::size_t c = 0; c < d; ++c) xn.at(r, c) = (x_tr.at(r, c) - x_mean.at(0, c)) / x_std.at(0, c);

  AdamW opt(AdamWConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay, 1.0});
  ParamSet best = weights;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  const std::size_t b = std::min(cfg.batch_size, x_tr.rows());
  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    RngStream pick(cfg.seed, "surrogate.batch", step);
    Tensor xb({b, d}), yb({b, 1});
    for (std::size_t r = 0; r < b; ++r) {
      const std::size_t i = pick.below(x_tr.rows());
      for (std::size_t c = 0; c < d; ++c) xb.at(r, c) = xn.at(i, c);
      yb.at(r, 0) = (y_tr[i] - y_mean) / y_std;
    }
    Tape tape;
    Var loss = mean(square(sub(shape.forward(tape, weights, tape.constant(xb)), tape.constant(yb))));
    if (!std::isfinite(loss.value().item())) {
      throw std::runtime_error("train_surrogate: non-finite loss at step " + std::to_string(step));
    }
    opt.step(weights, tape.gradient(loss, weights));
    if (step % cfg.eval_every == 0 || step == cfg.max_steps) {
      const double val = mean_abs_error(Surrogate(with_stats(weights)).predict(x_val), y_val);
      if (val < best_val) {
        best_val = val;
        best = weights;
        res.report.best_step = step;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
  }
  res.model = Surrogate(with_stats(best));
  res.report.val_mae = best_val;
  res.report.train_mae = mean_abs_error(res.model.predict(x_tr), y_tr);
  res.report.baseline_mae = mean_abs_error(std::vector<double>(y_val.size(), y_mean), y_val);
  double all_mean = 0.0, all_var = 0.0;
  for (double v : y) all_mean += v;
  all_mean /= static_cast<double>(n);
  for (double v : y) all_var += (v - all_mean) * (v - all_mean);
  res.report.target_std = std::sqrt(all_var / static_cast<double>(n));
  return res;
}

}  // namespace crl::rewards
