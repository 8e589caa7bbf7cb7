#include "crl/numkit/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace crl::nk {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, "const", false});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::param(const std::string& name, const Tensor& value) {
  if (auto it = params_.find(name); it != params_.end()) return Var(this, it->second);
  nodes_.push_back(Node{value, {}, nullptr, "param:" + name, record_});
  const int id = static_cast<int>(nodes_.size() - 1);
  params_.emplace(name, id);
  return Var(this, id);
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward, std::string op) {
  Node node;
  node.value = std::move(value);
  node.op = std::move(op);
  if (record_) {
    for (const Var& in : inputs) {
      if (&in.tape() != this) throw std::invalid_argument(node.op + ": input belongs to another tape");
      node.inputs.push_back(in.id());
      node.requires_grad = node.requires_grad || nodes_[static_cast<std::size_t>(in.id())].requires_grad;
    }
    if (node.requires_grad) node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

std::string Tape::describe(Var v) const {
  return "node#" + std::to_string(v.id()) + " (" + op_name(v.id()) + ") " + shape_str(value(v.id()).shape());
}

GradMap Tape::gradient(Var loss) const {
  if (loss.id() < 0 || static_cast<std::size_t>(loss.id()) >= nodes_.size() || &loss.tape() != this) {
    throw std::invalid_argument("gradient: loss node is not on this tape");
  }
  const Tensor& lv = value(loss.id());
  if (!lv.is_scalar()) {
    throw ShapeError("gradient: loss " + describe(loss) + " is not scalar-shaped");
  }
  if (!record_) throw std::logic_error("gradient: tape was built without recording");

  std::vector<Tensor> grads(nodes_.size());
  std::vector<char> has(nodes_.size(), 0);
  grads[static_cast<std::size_t>(loss.id())] = Tensor::full(lv.shape(), 1.0);
  has[static_cast<std::size_t>(loss.id())] = 1;

  std::vector<Tensor*> input_ptrs;
  for (int id = loss.id(); id >= 0; --id) {
    const auto uid = static_cast<std::size_t>(id);
    const Node& node = nodes_[uid];
    if (!has[uid] || !node.backward) continue;
    input_ptrs.clear();
    for (int in : node.inputs) {
      const auto uin = static_cast<std::size_t>(in);
      if (!nodes_[uin].requires_grad) {
        input_ptrs.push_back(nullptr);
        continue;
      }
      if (!has[uin]) {
        grads[uin] = Tensor::zeros(nodes_[uin].value.shape());
        has[uin] = 1;
      }
      input_ptrs.push_back(&grads[uin]);
    }
    node.backward(grads[uid], node.value, input_ptrs);
  }

  GradMap out;
  for (const auto& [name, id] : params_) {
    const auto uid = static_cast<std::size_t>(id);
    out.emplace(name, has[uid] ? grads[uid] : Tensor::zeros(nodes_[uid].value.shape()));
  }
  return out;
}

GradMap Tape::gradient(Var loss, const ParamSet& all) const {
  GradMap out = gradient(loss);
  for (const auto& [name, value] : all) {
    if (!out.count(name)) out.emplace(name, Tensor::zeros(value.shape()));
  }
  return out;
}

GradMap autodiff_gradient(const Tape& tape, Var loss) { return tape.gradient(loss); }

namespace {

struct Dims {
  std::size_t r, c;
};

Dims dims_of(const Shape& s) {
  if (s.size() > 2) throw ShapeError("rank > 2 tensors are not supported by element-wise ops");
  if (s.empty()) return {1, 1};
  if (s.size() == 1) return {1, s[0]};
  return {s[0], s[1]};
}

std::size_t bcast_dim(std::size_t a, std::size_t b, bool& ok) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  ok = false;
  return 0;
}

Shape broadcast_shape(Var a, Var b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const Dims da = dims_of(sa), db = dims_of(sb);
  bool ok = true;
  const std::size_t r = bcast_dim(da.r, db.r, ok);
  const std::size_t c = bcast_dim(da.c, db.c, ok);
  if (!ok || (sa.size() < 2 && sb.size() < 2 && r != 1)) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.tape().describe(a) + " vs " +
                     b.tape().describe(b));
  }
  const std::size_t rank = std::max(sa.size(), sb.size());
  if (rank == 2) return {r, c};
  if (rank == 1) return {c};
  return {};
}

// Sum `g` (laid out with dims `out`) down to the target's dims and accumulate.
void accumulate_reduced(const Tensor& g, Dims out, Tensor& target) {
  const Dims t = dims_of(target.shape());
  if (t.r == out.r && t.c == out.c) {
    for (std::size_t i = 0; i < g.size(); ++i) target[i] += g[i];
    return;
  }
  for (std::size_t i = 0; i < out.r; ++i) {
    const std::size_t ti = t.r == 1 ? 0 : i;
    for (std::size_t j = 0; j < out.c; ++j) {
      const std::size_t tj = t.c == 1 ? 0 : j;
      target[ti * t.c + tj] += g[i * out.c + j];
    }
  }
}

inline std::size_t bidx(Dims d, std::size_t i, std::size_t j) {
  return (d.r == 1 ? 0 : i) * d.c + (d.c == 1 ? 0 : j);
}

// Element-wise binary op with broadcasting. dfa/dfb give partials at (x, y).
template <class F, class DA, class DB>
Var binary(Var a, Var b, const char* op, F f, DA dfa, DB dfb) {
  Shape shape = broadcast_shape(a, b, op);
  const Dims out = dims_of(shape);
  const Dims da = dims_of(a.shape()), db = dims_of(b.shape());
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  Tensor result(shape);
  for (std::size_t i = 0; i < out.r; ++i)
    for (std::size_t j = 0; j < out.c; ++j) result[i * out.c + j] = f(va[bidx(da, i, j)], vb[bidx(db, i, j)]);

  auto backward = [=, &va, &vb](const Tensor& g, const Tensor&, std::span<Tensor*> grads) {
    Tensor ga, gb;
    if (grads[0]) ga = Tensor(g.shape());
    if (grads[1]) gb = Tensor(g.shape());
    for (std::size_t i = 0; i < out.r; ++i) {
      for (std::size_t j = 0; j < out.c; ++j) {
        const std::size_t k = i * out.c + j;
        const double x = va[bidx(da, i, j)];
        const double y = vb[bidx(db, i, j)];
        if (grads[0]) ga[k] = g[k] * dfa(x, y);
        if (grads[1]) gb[k] = g[k] * dfb(x, y);
      }
    }
    if (grads[0]) accumulate_reduced(ga, out, *grads[0]);
    if (grads[1]) accumulate_reduced(gb, out, *grads[1]);
  };
  return a.tape().record(std::move(result), {a, b}, backward, op);
}

// Element-wise unary op; df receives (x, f(x)).
template <class F, class DF>
Var unary(Var a, const char* op, F f, DF df) {
  const Tensor& va = a.value();
  Tensor result(va.shape());
  for (std::size_t i = 0; i < va.size(); ++i) result[i] = f(va[i]);
  auto backward = [df, &va](const Tensor& g, const Tensor& out, std::span<Tensor*> grads) {
    Tensor& ga = *grads[0];
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(va[i], out[i]);
  };
  return a.tape().record(std::move(result), {a}, backward, op);
}

double softplus_value(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_rank2(Var a, const char* op) {
  if (a.shape().size() != 2) {
    throw ShapeError(std::string(op) + ": expected rank-2 input, got " + a.tape().describe(a));
  }
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var div(Var a, Var b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

// Ties route the gradient to the first operand.
Var minimum(Var a, Var b) {
  return binary(
      a, b, "minimum", [](double x, double y) { return x <= y ? x : y; },
      [](double x, double y) { return x <= y ? 1.0 : 0.0; }, [](double x, double y) { return x <= y ? 0.0 : 1.0; });
}

Var broadcast_to(Var a, const Shape& shape) {
  Var zeros = a.tape().constant(Tensor::zeros(shape));
  Var out = add(a, zeros);
  if (out.shape() != shape) {
    throw ShapeError("broadcast_to: cannot broadcast " + a.tape().describe(a) + " to " + shape_str(shape));
  }
  return out;
}

Var neg(Var a) {
  return unary(a, "neg", [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var scale(Var a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var square(Var a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(Var a) {
  return unary(
      a, "sqrt", [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var exp(Var a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var tanh(Var a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary(a, "sigmoid", sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var a) {
  return unary(a, "softplus", softplus_value, [](double x, double) { return sigmoid_value(x); });
}

Var silu(Var a) {
  return unary(
      a, "silu", [](double x) { return x * sigmoid_value(x); },
      [](double x, double) {
        const double s = sigmoid_value(x);
        return s * (1.0 + x * (1.0 - s));
      });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var wrap_periodic(Var a) {
  return unary(
      a, "wrap_periodic", [](double x) { return x - std::round(x); }, [](double, double) { return 1.0; });
}

Var matmul(Var a, Var b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: inner dimensions differ " + a.tape().describe(a) + " vs " + b.tape().describe(b));
  }
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  auto backward = [&va, &vb](const Tensor& g, const Tensor&, std::span<Tensor*> grads) {
    if (grads[0]) {
      Tensor ga = matmul_nt(g, vb);
      for (std::size_t i = 0; i < ga.size(); ++i) (*grads[0])[i] += ga[i];
    }
    if (grads[1]) {
      Tensor gb = matmul_tn(va, g);
      for (std::size_t i = 0; i < gb.size(); ++i) (*grads[1])[i] += gb[i];
    }
  };
  return a.tape().record(nk::matmul(va, vb), {a, b}, backward, "matmul");
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  auto backward = [](const Tensor& g, const Tensor&, std::span<Tensor*> grads) {
    for (double& v : grads[0]->data()) v += g[0];
  };
  return a.tape().record(Tensor::scalar(s), {a}, backward, "sum");
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var row_sum(Var a) {
  require_rank2(a, "row_sum");
  const Tensor& va = a.value();
  const std::size_t r = va.rows(), c = va.cols();
  Tensor out(Shape{r, 1});
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += va.at(i, j);
    out[i] = s;
  }
  auto backward = [r, c](const Tensor& g, const Tensor&, std::span<Tensor*> grads) {
    Tensor& ga = *grads[0];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i];
  };
  return a.tape().record(std::move(out), {a}, backward, "row_sum");
}

Var row_mean(Var a) { return scale(row_sum(a), 1.0 / static_cast<double>(a.value().cols())); }

Var col_sum(Var a) {
  require_rank2(a, "col_sum");
  const Tensor& va = a.value();
  const std::size_t r = va.rows(), c = va.cols();
  Tensor out(Shape{1, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += va.at(i, j);
  auto backward = [r, c](const Tensor& g, const Tensor&, std::span<Tensor*> grads) {
    Tensor& ga = *grads[0];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j];
  };
  return a.tape().record(std::move(out), {a}, backward, "col_sum");
}

Var col_mean(Var a) { return scale(col_sum(a), 1.0 / static_cast<double>(a.value().rows())); }

Var reshape(Var a, const Shape& shape) {
  Tensor out = a.value().reshaped(shape);
  auto backward = [](const Tensor& g, const Tensor&, std::span<Tensor*> grads) {
    Tensor& ga = *grads[0];
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  };
  return a.tape().record(std::move(out), {a}, backward, "reshape");
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_cols");
  const Tensor& va = a.value();
  const std::size_t r = va.rows(), c = va.cols();
  if (begin > end || end > c) throw ShapeError("slice_cols: range out of bounds for " + a.tape().describe(a));
  const std::size_t w = end - begin;
  Tensor out(Shape{r, w});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = va[i * c + begin + j];
  auto backward = [r, c, w, begin](const Tensor& g, const Tensor&, std::span<Tensor*> grads) {
    Tensor& ga = *grads[0];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) ga[i * c + begin + j] += g[i * w + j];
  };
  return a.tape().record(std::move(out), {a}, backward, "slice_cols");
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_rows");
  const Tensor& va = a.value();
  const std::size_t r = va.rows(), c = va.cols();
  if (begin > end || end > r) throw ShapeError("slice_rows: range out of bounds for " + a.tape().describe(a));
  std::vector<double> data(va.data().begin() + static_cast<std::ptrdiff_t>(begin * c),
                           va.data().begin() + static_cast<std::ptrdiff_t>(end * c));
  auto backward = [c, begin](const Tensor& g, const Tensor&, std::span<Tensor*> grads) {
    Tensor& ga = *grads[0];
    for (std::size_t k = 0; k < g.size(); ++k) ga[begin * c + k] += g[k];
  };
  return a.tape().record(Tensor(Shape{end - begin, c}, std::move(data)), {a}, backward, "slice_rows");
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t r = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.value().rows() != r) {
      throw ShapeError("concat_cols: row counts differ " + parts[0].tape().describe(parts[0]) + " vs " +
                       p.tape().describe(p));
    }
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Tensor out(Shape{r, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + off + j] = v[i * widths[k] + j];
    off += widths[k];
  }
  auto backward = [r, total, widths](const Tensor& g, const Tensor&, std::span<Tensor*> grads) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (grads[k]) {
        Tensor& gk = *grads[k];
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) gk[i * widths[k] + j] += g[i * total + offset + j];
      }
      offset += widths[k];
    }
  };
  return parts[0].tape().record(std::move(out), parts, backward, "concat_cols");
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts[0].value().cols();
  std::vector<double> data;
  std::vector<std::size_t> sizes;
  std::size_t rows = 0;
  for (const Var& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.value().cols() != c) {
      throw ShapeError("concat_rows: column counts differ " + parts[0].tape().describe(parts[0]) + " vs " +
                       p.tape().describe(p));
    }
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
    sizes.push_back(p.value().size());
    rows += p.value().rows();
  }
  auto backward = [sizes](const Tensor& g, const Tensor&, std::span<Tensor*> grads) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (grads[k]) {
        Tensor& gk = *grads[k];
        for (std::size_t i = 0; i < sizes[k]; ++i) gk[i] += g[offset + i];
      }
      offset += sizes[k];
    }
  };
  return parts[0].tape().record(Tensor(Shape{rows, c}, std::move(data)), parts, backward, "concat_rows");
}

Var gather_rows(Var table, const std::vector<std::size_t>& indices) {
  require_rank2(table, "gather_rows");
  const Tensor& vt = table.value();
  const std::size_t c = vt.cols();
  Tensor out(Shape{indices.size(), c});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= vt.rows()) throw ShapeError("gather_rows: index out of range for " + table.tape().describe(table));
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = vt[indices[i] * c + j];
  }
  auto backward = [indices, c](const Tensor& g, const Tensor&, std::span<Tensor*> grads) {
    Tensor& gt = *grads[0];
    for (std::size_t i = 0; i < indices.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) gt[indices[i] * c + j] += g[i * c + j];
  };
  return table.tape().record(std::move(out), {table}, backward, "gather_rows");
}

Var log_softmax_rows(Var a) {
  require_rank2(a, "log_softmax_rows");
  const Tensor& va = a.value();
  const std::size_t r = va.rows(), c = va.cols();
  Tensor out(va.shape());
  for (std::size_t i = 0; i < r; ++i) {
    double m = va[i * c];
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, va[i * c + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(va[i * c + j] - m);
    const double lse = m + std::log(s);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = va[i * c + j] - lse;
  }
  auto backward = [r, c](const Tensor& g, const Tensor& y, std::span<Tensor*> grads) {
    Tensor& ga = *grads[0];
    for (std::size_t i = 0; i < r; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < c; ++j) gs += g[i * c + j];
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i * c + j] - std::exp(y[i * c + j]) * gs;
    }
  };
  return a.tape().record(std::move(out), {a}, backward, "log_softmax_rows");
}

Var softmax_rows(Var a) { return exp(log_softmax_rows(a)); }

}  // namespace crl::nk
