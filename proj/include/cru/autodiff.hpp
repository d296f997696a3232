#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cru/tensor.hpp"

namespace cru {

/// A named trainable tensor with its accumulated gradient.
struct Param {
  Param() = default;
  Param(std::string name, Tensor value)
      : name(std::move(name)), value(std::move(value)), grad(Tensor::zeros_like(this->value)) {}

  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  /// Gradient after Tape::backward; throws if the node was not reached.
  const Tensor& grad() const;
  bool has_grad() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Append-only record of tensor operations for reverse-mode differentiation.
///
/// Node inputs always precede the node, so a reverse sweep over ids is a
/// valid topological order. A Tape is a single-threaded unit of work.
class Tape {
 public:
  /// Reads grads of the node being processed and accumulates into inputs.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf whose gradient is kept on the tape only.
  Var variable(Tensor value);
  /// Leaf bound to a Param. Backward adds the node gradient into param.grad
  /// unless flushing is deferred (see backward()).
  Var param(Param& p);

  Var push(Tensor value, std::vector<Var> inputs, BackwardFn fn);

  /// Seeds d(loss)/d(loss) = 1 and sweeps backward. With flush_params the
  /// gradients of Param leaves are added into Param::grad right away;
  /// otherwise call flush_param_grads() later (e.g. under a lock).
  void backward(Var loss, bool flush_params = true);
  void flush_param_grads(double scale = 1.0);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }
  const Tensor& grad(std::size_t id) const;
  /// Gradient buffer of an input node, allocated on first use. Writing to a
  /// node that backward already finalized is a logic error and throws.
  Tensor& grad_for_accumulate(std::size_t id);
  std::size_t input(std::size_t self, std::size_t which) const {
    return nodes_[self].inputs[which];
  }
  std::size_t size() const { return nodes_.size(); }

  /// Number of grad writes that targeted an already-finalized node. Always
  /// zero for a correct tape; exposed for instrumentation tests.
  std::size_t ordering_violations() const { return ordering_violations_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Param* param = nullptr;
    bool requires_grad = false;
    bool finalized = false;
  };

  std::deque<Node> nodes_;  // deque: value() references stay valid as the tape grows
  std::size_t ordering_violations_ = 0;
};

enum class Activation { identity, sigmoid, tanh, relu };

Activation parse_activation(const std::string& name);
const char* activation_name(Activation kind);

// Ops. Shapes are checked eagerly and mismatches throw DimensionError.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// 1 - a.
Var one_minus(Var a);

Var activate(Activation kind, Var x);
Var sigmoid(Var x);
Var tanh(Var x);
Var relu(Var x);

/// (m x k) . (k x p). A rank-1 left operand is treated as a single row.
Var matmul(Var a, Var b);
/// x . W^T for x (rows x in) and W (out x in); rank-1 x is treated as one row.
Var matmul_nt(Var x, Var w);
/// Adds a bias vector to every row of x (last axis must equal bias length).
Var add_bias(Var x, Var bias);
/// x . W^T + b.
Var linear(Var x, Var w, Var bias);

Var reshape(Var a, Shape shape);
/// Concatenation along the leading axis.
Var concat_rows(std::span<const Var> parts);
/// Concatenation along the last axis.
Var concat_last(std::span<const Var> parts);
/// Selects index t along the leading axis, dropping that axis.
Var take(Var a, std::size_t t);
/// Rows of a rank-2 table selected by index; backward scatter-adds.
Var gather_rows(Var table, std::span<const std::size_t> ids);

Var sum(Var a);
Var mean(Var a);

/// Zero-padded same-length 1-D convolution along the leading axis.
/// input: [n x d_in] or time-major [n x B x d_in]; filters: [d_out x k x d_in];
/// bias: [d_out]. Returns the pre-activation with the same leading dims.
Var conv_same(Var input, Var filters, Var bias);

/// Mean binary cross-entropy of probabilities p against labels, with p
/// clamped to [1e-7, 1 - 1e-7]; clamped entries pass no gradient.
Var bce(Var p, const Tensor& labels);

inline constexpr double kProbClamp = 1e-7;

}  // namespace cru
