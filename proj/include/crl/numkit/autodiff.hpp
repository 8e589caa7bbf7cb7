#pragma once

#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "crl/numkit/tensor.hpp"

namespace crl::nk {

using ParamSet = std::map<std::string, Tensor>;
using GradMap = std::map<std::string, Tensor>;

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Accumulates into input gradients; entries are null for inputs that do not
// require a gradient. `out` is the node's forward value.
using BackwardFn =
    std::function<void(const Tensor& grad_out, const Tensor& out, std::span<Tensor*> input_grads)>;

// Define-by-run reverse-mode tape. A tape built with record=false evaluates
// values only, which is what inference paths use.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Named differentiable leaf. Registering the same name twice returns the
  // original node.
  Var param(const std::string& name, const Tensor& value);
  Var param(const ParamSet& params, const std::string& name) { return param(name, params.at(name)); }

  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward, std::string op);

  const Tensor& value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
  bool requires_grad(int id) const { return nodes_.at(static_cast<std::size_t>(id)).requires_grad; }
  const std::string& op_name(int id) const { return nodes_.at(static_cast<std::size_t>(id)).op; }
  std::string describe(Var v) const;
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  // dLoss/dParam for every named leaf on this tape.
  GradMap gradient(Var loss) const;
  // Same, but covering every entry of `all`; parameters the loss never touched
  // receive zero gradients.
  GradMap gradient(Var loss, const ParamSet& all) const;

 private:
  struct Node {
    Tensor value;
    std::vector<int> inputs;
    BackwardFn backward;
    std::string op;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;  // stable references: closures capture input values
  std::unordered_map<std::string, int> params_;
  bool record_;
};

// autodiff_gradient as a free function.
GradMap autodiff_gradient(const Tape& tape, Var loss);

// --- primitive ops --------------------------------------------------------
// Binary element-wise ops broadcast rank <= 2 operands: equal shapes, scalars,
// a row vector against a matrix, or a column (R,1) against a matrix.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var minimum(Var a, Var b);
Var broadcast_to(Var a, const Shape& shape);

Var neg(Var a);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var square(Var a);
Var sqrt(Var a);
Var exp(Var a);
Var log(Var a);
Var tanh(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var silu(Var a);
Var clamp(Var a, double lo, double hi);
// x - round(x); derivative 1 almost everywhere.
Var wrap_periodic(Var a);

Var matmul(Var a, Var b);
Var sum(Var a);
Var mean(Var a);
Var row_sum(Var a);   // (R,C) -> (R,1)
Var row_mean(Var a);  // (R,C) -> (R,1)
Var col_sum(Var a);   // (R,C) -> (1,C)
Var col_mean(Var a);  // (R,C) -> (1,C)
Var reshape(Var a, const Shape& shape);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var gather_rows(Var table, const std::vector<std::size_t>& indices);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator+(Var a, double s) { return add_scalar(a, s); }
inline Var operator-(Var a, double s) { return add_scalar(a, -s); }

}  // namespace crl::nk
