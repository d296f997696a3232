#include "cru/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cru/errors.hpp"

namespace cru {

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }
bool Var::has_grad() const { return tape_->has_grad(id_); }

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Param& p) {
  Node node;
  node.value = p.value;
  node.requires_grad = true;
  node.param = &p;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::push(Tensor value, std::vector<Var> inputs, BackwardFn fn) {
  Node node;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (&in.tape() != this) throw ContractError("op mixes vars from different tapes");
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::grad(std::size_t id) const {
  const auto& node = nodes_.at(id);
  if (node.grad.empty()) {
    throw ContractError("node " + std::to_string(id) + " has no gradient (not reached by backward)");
  }
  return node.grad;
}

Tensor& Tape::grad_for_accumulate(std::size_t id) {
  auto& node = nodes_[id];
  if (node.finalized) {
    ++ordering_violations_;
    throw ContractError("backward wrote to finalized node " + std::to_string(id));
  }
  if (node.grad.empty()) node.grad = Tensor::zeros_like(node.value);
  return node.grad;
}

void Tape::backward(Var loss, bool flush_params) {
  if (&loss.tape() != this) throw ContractError("loss belongs to another tape");
  auto& root = nodes_[loss.id()];
  if (root.value.numel() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + to_string(root.value.shape()));
  }
  if (!root.grad.empty()) throw ContractError("backward already ran on this tape");
  if (!root.requires_grad) return;
  root.grad = Tensor(root.value.shape(), 1.0);

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (node.grad.empty()) continue;
    node.finalized = true;
    if (node.backward) node.backward(*this, i);
  }
  if (flush_params) flush_param_grads();
}

void Tape::flush_param_grads(double scale) {
  for (auto& node : nodes_) {
    if (node.param && !node.grad.empty()) node.param->grad.axpy(scale, node.grad);
  }
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

namespace {

/// Gradient buffer of input `which`, or nullptr when it needs none.
Tensor* input_grad(Tape& t, std::size_t self, std::size_t which) {
  const auto id = t.input(self, which);
  if (!t.requires_grad(id)) return nullptr;
  return &t.grad_for_accumulate(id);
}

bool is_scalar(const Tensor& t) { return t.numel() == 1; }

/// Rows x last-axis view of a tensor.
std::pair<std::size_t, std::size_t> as_rows(const Shape& s) {
  const std::size_t cols = s.back();
  return {shape_numel(s) / cols, cols};
}

enum class BinOp { add, sub, mul };

Var binary(BinOp op, Var a, Var b, const char* name) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool a_bcast = is_scalar(av) && !is_scalar(bv);
  const bool b_bcast = is_scalar(bv) && !is_scalar(av);
  if (!a_bcast && !b_bcast) require_same_shape(av, bv, name);

  Tensor out(a_bcast ? bv.shape() : av.shape());
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[a_bcast ? 0 : i];
    const double y = bv[b_bcast ? 0 : i];
    out[i] = op == BinOp::add ? x + y : op == BinOp::sub ? x - y : x * y;
  }

  return a.tape().push(std::move(out), {a, b}, [op, a_bcast, b_bcast](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.value(t.input(self, 0));
    const Tensor& y = t.value(t.input(self, 1));
    const std::size_t n = g.numel();
    if (Tensor* ga = input_grad(t, self, 0)) {
      for (std::size_t i = 0; i < n; ++i) {
        const double d = op == BinOp::mul ? g[i] * y[b_bcast ? 0 : i] : g[i];
        (*ga)[a_bcast ? 0 : i] += d;
      }
    }
    if (Tensor* gb = input_grad(t, self, 1)) {
      for (std::size_t i = 0; i < n; ++i) {
        const double d = op == BinOp::mul ? g[i] * x[a_bcast ? 0 : i]
                         : op == BinOp::sub ? -g[i]
                                            : g[i];
        (*gb)[b_bcast ? 0 : i] += d;
      }
    }
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

Var add(Var a, Var b) { return binary(BinOp::add, a, b, "add"); }
Var sub(Var a, Var b) { return binary(BinOp::sub, a, b, "sub"); }
Var mul(Var a, Var b) { return binary(BinOp::mul, a, b, "mul"); }

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= s;
  return a.tape().push(std::move(out), {a}, [s](Tape& t, std::size_t self) {
    if (Tensor* ga = input_grad(t, self, 0)) ga->axpy(s, t.grad(self));
  });
}

Var add_scalar(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.data()) v += s;
  return a.tape().push(std::move(out), {a}, [](Tape& t, std::size_t self) {
    if (Tensor* ga = input_grad(t, self, 0)) ga->axpy(1.0, t.grad(self));
  });
}

Var one_minus(Var a) {
  Tensor out = a.value();
  for (auto& v : out.data()) v = 1.0 - v;
  return a.tape().push(std::move(out), {a}, [](Tape& t, std::size_t self) {
    if (Tensor* ga = input_grad(t, self, 0)) ga->axpy(-1.0, t.grad(self));
  });
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + name + "'");
}

const char* activation_name(Activation kind) {
  switch (kind) {
    case Activation::identity: return "identity";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "?";
}

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var activate(Activation kind, Var x) {
  if (kind == Activation::identity) return x;
  if (!x.value().all_finite()) throw NumericError("non-finite input to activation");
  Tensor out = x.value();
  switch (kind) {
    case Activation::sigmoid:
      for (auto& v : out.data()) v = stable_sigmoid(v);
      break;
    case Activation::tanh:
      for (auto& v : out.data()) v = std::tanh(v);
      break;
    case Activation::relu:
      for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::identity:
      break;
  }
  return x.tape().push(std::move(out), {x}, [kind](Tape& t, std::size_t self) {
    Tensor* gx = input_grad(t, self, 0);
    if (!gx) return;
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    const std::size_t n = g.numel();
    switch (kind) {
      case Activation::sigmoid:
        for (std::size_t i = 0; i < n; ++i) (*gx)[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      case Activation::tanh:
        for (std::size_t i = 0; i < n; ++i) (*gx)[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      case Activation::relu:
        // relu'(0) = 0
        for (std::size_t i = 0; i < n; ++i) {
          if (y[i] > 0.0) (*gx)[i] += g[i];
        }
        break;
      case Activation::identity:
        break;
    }
  });
}

Var sigmoid(Var x) { return activate(Activation::sigmoid, x); }
Var tanh(Var x) { return activate(Activation::tanh, x); }
Var relu(Var x) { return activate(Activation::relu, x); }

// ---------------------------------------------------------------------------
// Products
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() > 2 || bv.rank() != 2) {
    throw DimensionError("matmul expects (m x k) . (k x p), got " + to_string(av.shape()) + " . " +
                         to_string(bv.shape()));
  }
  const std::size_t m = av.rank() == 1 ? 1 : av.dim(0);
  const std::size_t k = av.shape().back();
  const std::size_t p = bv.dim(1);
  if (bv.dim(0) != k) {
    throw DimensionError("matmul inner dimensions differ: " + to_string(av.shape()) + " . " +
                         to_string(bv.shape()));
  }
  Tensor out(av.rank() == 1 ? Shape{p} : Shape{m, p});
  const double* A = av.raw();
  const double* B = bv.raw();
  double* C = out.raw();
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double s = A[r * k + kk];
      const double* brow = B + kk * p;
      double* crow = C + r * p;
      for (std::size_t j = 0; j < p; ++j) crow[j] += s * brow[j];
    }
  }
  return a.tape().push(std::move(out), {a, b}, [m, k, p](Tape& t, std::size_t self) {
    const double* G = t.grad(self).raw();
    const double* A = t.value(t.input(self, 0)).raw();
    const double* B = t.value(t.input(self, 1)).raw();
    if (Tensor* ga = input_grad(t, self, 0)) {
      double* GA = ga->raw();
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          double acc = 0.0;
          for (std::size_t j = 0; j < p; ++j) acc += G[r * p + j] * B[kk * p + j];
          GA[r * k + kk] += acc;
        }
      }
    }
    if (Tensor* gb = input_grad(t, self, 1)) {
      double* GB = gb->raw();
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double s = A[r * k + kk];
          for (std::size_t j = 0; j < p; ++j) GB[kk * p + j] += s * G[r * p + j];
        }
      }
    }
  });
}

Var matmul_nt(Var x, Var w) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (wv.rank() != 2 || xv.shape().back() != wv.dim(1)) {
    throw DimensionError("matmul_nt: input " + to_string(xv.shape()) +
                         " does not match weight " + to_string(wv.shape()));
  }
  const auto [rows, in] = as_rows(xv.shape());
  const std::size_t out_dim = wv.dim(0);
  Shape out_shape = xv.shape();
  out_shape.back() = out_dim;
  Tensor out(out_shape);
  const double* X = xv.raw();
  const double* W = wv.raw();
  double* Y = out.raw();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xrow = X + r * in;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wrow = W + o * in;
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += xrow[i] * wrow[i];
      Y[r * out_dim + o] = acc;
    }
  }
  return x.tape().push(std::move(out), {x, w}, [rows, in, out_dim](Tape& t, std::size_t self) {
    const double* G = t.grad(self).raw();
    const double* X = t.value(t.input(self, 0)).raw();
    const double* W = t.value(t.input(self, 1)).raw();
    if (Tensor* gx = input_grad(t, self, 0)) {
      double* GX = gx->raw();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t o = 0; o < out_dim; ++o) {
          const double s = G[r * out_dim + o];
          if (s == 0.0) continue;
          const double* wrow = W + o * in;
          double* dst = GX + r * in;
          for (std::size_t i = 0; i < in; ++i) dst[i] += s * wrow[i];
        }
      }
    }
    if (Tensor* gw = input_grad(t, self, 1)) {
      double* GW = gw->raw();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xrow = X + r * in;
        for (std::size_t o = 0; o < out_dim; ++o) {
          const double s = G[r * out_dim + o];
          if (s == 0.0) continue;
          double* dst = GW + o * in;
          for (std::size_t i = 0; i < in; ++i) dst[i] += s * xrow[i];
        }
      }
    }
  });
}

Var add_bias(Var x, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.rank() != 1 || xv.shape().back() != bv.dim(0)) {
    throw DimensionError("add_bias: input " + to_string(xv.shape()) + " vs bias " +
                         to_string(bv.shape()));
  }
  const auto [rows, cols] = as_rows(xv.shape());
  Tensor out = xv;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[c];
  }
  return x.tape().push(std::move(out), {x, bias}, [rows, cols](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (Tensor* gx = input_grad(t, self, 0)) gx->axpy(1.0, g);
    if (Tensor* gb = input_grad(t, self, 1)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) (*gb)[c] += g[r * cols + c];
      }
    }
  });
}

Var linear(Var x, Var w, Var bias) { return add_bias(matmul_nt(x, w), bias); }

// ---------------------------------------------------------------------------
// Structural
// ---------------------------------------------------------------------------

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape().push(std::move(out), {a}, [](Tape& t, std::size_t self) {
    Tensor* ga = input_grad(t, self, 0);
    if (!ga) return;
    const Tensor& g = t.grad(self);
    for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i];
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows needs at least one part");
  const Shape& first = parts[0].shape();
  const Shape trailing(first.begin() + 1, first.end());
  std::size_t lead = 0;
  std::vector<double> data;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(trailing.begin(), trailing.end(), s.begin() + 1)) {
      throw DimensionError("concat_rows: incompatible parts " + to_string(first) + " and " +
                           to_string(s));
    }
    offsets.push_back(data.size());
    const auto d = p.value().data();
    data.insert(data.end(), d.begin(), d.end());
    lead += s[0];
  }
  Shape out_shape = first;
  out_shape[0] = lead;
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().push(
      Tensor(out_shape, std::move(data)), std::move(inputs),
      [offsets = std::move(offsets)](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        for (std::size_t k = 0; k < offsets.size(); ++k) {
          Tensor* gp = input_grad(t, self, k);
          if (!gp) continue;
          for (std::size_t i = 0; i < gp->numel(); ++i) (*gp)[i] += g[offsets[k] + i];
        }
      });
}

Var concat_last(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_last needs at least one part");
  const Shape& first = parts[0].shape();
  const auto [rows, c0] = as_rows(first);
  (void)c0;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(s.begin(), s.end() - 1, first.begin())) {
      throw DimensionError("concat_last: incompatible parts " + to_string(first) + " and " +
                           to_string(s));
    }
    widths.push_back(s.back());
    total += s.back();
  }
  Shape out_shape = first;
  out_shape.back() = total;
  Tensor out(out_shape);
  std::size_t col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const double* src = parts[k].value().raw();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(src + r * widths[k], widths[k], out.raw() + r * total + col);
    }
    col += widths[k];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().push(
      std::move(out), std::move(inputs),
      [rows, total, widths = std::move(widths)](Tape& t, std::size_t self) {
        const double* G = t.grad(self).raw();
        std::size_t col = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
          if (Tensor* gp = input_grad(t, self, k)) {
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t c = 0; c < widths[k]; ++c) {
                (*gp)[r * widths[k] + c] += G[r * total + col + c];
              }
            }
          }
          col += widths[k];
        }
      });
}

Var take(Var a, std::size_t index) {
  const Tensor& av = a.value();
  if (av.rank() < 2) throw DimensionError("take needs rank >= 2, got " + to_string(av.shape()));
  if (index >= av.dim(0)) {
    throw IndexError("take: index " + std::to_string(index) + " out of range for " +
                     to_string(av.shape()));
  }
  const Shape out_shape(av.shape().begin() + 1, av.shape().end());
  const std::size_t block = shape_numel(out_shape);
  const auto first = av.data().begin() + static_cast<std::ptrdiff_t>(index * block);
  Tensor out(out_shape, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(block)));
  return a.tape().push(std::move(out), {a}, [index, block](Tape& t, std::size_t self) {
    Tensor* ga = input_grad(t, self, 0);
    if (!ga) return;
    const Tensor& g = t.grad(self);
    for (std::size_t i = 0; i < block; ++i) (*ga)[index * block + i] += g[i];
  });
}

Var gather_rows(Var table, std::span<const std::size_t> ids) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw DimensionError("gather_rows needs a rank-2 table");
  if (ids.empty()) throw ContractError("gather_rows needs at least one id");
  const std::size_t rows = tv.dim(0);
  const std::size_t d = tv.dim(1);
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= rows) {
      throw IndexError("id " + std::to_string(ids[i]) + " out of range for table of " +
                       std::to_string(rows) + " rows");
    }
    std::copy_n(tv.raw() + ids[i] * d, d, out.raw() + i * d);
  }
  return table.tape().push(std::move(out), {table},
                           [d, idx = std::vector<std::size_t>(ids.begin(), ids.end())](
                               Tape& t, std::size_t self) {
                             Tensor* gt = input_grad(t, self, 0);
                             if (!gt) return;
                             const double* G = t.grad(self).raw();
                             for (std::size_t i = 0; i < idx.size(); ++i) {
                               double* dst = gt->raw() + idx[i] * d;
                               for (std::size_t c = 0; c < d; ++c) dst[c] += G[i * d + c];
                             }
                           });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape().push(Tensor::scalar(s), {a}, [](Tape& t, std::size_t self) {
    Tensor* ga = input_grad(t, self, 0);
    if (!ga) return;
    const double g = t.grad(self)[0];
    for (auto& v : ga->data()) v += g;
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().numel())); }

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

Var conv_same(Var input, Var filters, Var bias) {
  const Tensor& x = input.value();
  const Tensor& f = filters.value();
  const Tensor& b = bias.value();
  if (f.rank() != 3) throw DimensionError("conv filters must be [d_out x k x d_in]");
  const std::size_t d_out = f.dim(0);
  const std::size_t k = f.dim(1);
  const std::size_t d_in = f.dim(2);
  if (k % 2 == 0) throw ConfigError("conv window length must be odd, got " + std::to_string(k));
  if (x.rank() < 2 || x.shape().back() != d_in) {
    throw DimensionError("conv input " + to_string(x.shape()) + " does not match filters " +
                         to_string(f.shape()));
  }
  if (b.rank() != 1 || b.dim(0) != d_out) {
    throw DimensionError("conv bias " + to_string(b.shape()) + " does not match filters " +
                         to_string(f.shape()));
  }
  const std::size_t n = x.dim(0);
  const std::size_t batch = x.rank() == 3 ? x.dim(1) : 1;
  const std::size_t pad = (k - 1) / 2;
  Shape out_shape = x.shape();
  out_shape.back() = d_out;
  Tensor out(out_shape);
  const double* X = x.raw();
  const double* F = f.raw();
  double* Y = out.raw();

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t bb = 0; bb < batch; ++bb) {
      double* yrow = Y + (i * batch + bb) * d_out;
      for (std::size_t o = 0; o < d_out; ++o) yrow[o] = b[o];
    }
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i + j) - static_cast<std::ptrdiff_t>(pad);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
      for (std::size_t bb = 0; bb < batch; ++bb) {
        const double* xrow = X + (static_cast<std::size_t>(src) * batch + bb) * d_in;
        double* yrow = Y + (i * batch + bb) * d_out;
        for (std::size_t o = 0; o < d_out; ++o) {
          const double* frow = F + (o * k + j) * d_in;
          double acc = 0.0;
          for (std::size_t c = 0; c < d_in; ++c) acc += frow[c] * xrow[c];
          yrow[o] += acc;
        }
      }
    }
  }

  return input.tape().push(
      std::move(out), {input, filters, bias},
      [n, batch, d_in, d_out, k, pad](Tape& t, std::size_t self) {
        const double* G = t.grad(self).raw();
        const double* X = t.value(t.input(self, 0)).raw();
        const double* F = t.value(t.input(self, 1)).raw();
        Tensor* gx = input_grad(t, self, 0);
        Tensor* gf = input_grad(t, self, 1);
        Tensor* gb = input_grad(t, self, 2);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t bb = 0; bb < batch; ++bb) {
            const double* grow = G + (i * batch + bb) * d_out;
            if (gb) {
              for (std::size_t o = 0; o < d_out; ++o) (*gb)[o] += grow[o];
            }
            for (std::size_t j = 0; j < k; ++j) {
              const std::ptrdiff_t src =
                  static_cast<std::ptrdiff_t>(i + j) - static_cast<std::ptrdiff_t>(pad);
              if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
              const std::size_t off = (static_cast<std::size_t>(src) * batch + bb) * d_in;
              for (std::size_t o = 0; o < d_out; ++o) {
                const double g = grow[o];
                if (g == 0.0) continue;
                const double* frow = F + (o * k + j) * d_in;
                if (gx) {
                  double* dst = gx->raw() + off;
                  for (std::size_t c = 0; c < d_in; ++c) dst[c] += g * frow[c];
                }
                if (gf) {
                  double* dst = gf->raw() + (o * k + j) * d_in;
                  for (std::size_t c = 0; c < d_in; ++c) dst[c] += g * X[off + c];
                }
              }
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

Var bce(Var p, const Tensor& labels) {
  const Tensor& pv = p.value();
  if (pv.numel() != labels.numel()) {
    throw DimensionError("bce: " + std::to_string(pv.numel()) + " probabilities vs " +
                         std::to_string(labels.numel()) + " labels");
  }
  const std::size_t n = pv.numel();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = std::clamp(pv[i], kProbClamp, 1.0 - kProbClamp);
    const double y = labels[i];
    total += -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
  }
  return p.tape().push(Tensor::scalar(total / static_cast<double>(n)), {p},
                       [labels, n](Tape& t, std::size_t self) {
                         Tensor* gp = input_grad(t, self, 0);
                         if (!gp) return;
                         const double g = t.grad(self)[0] / static_cast<double>(n);
                         const Tensor& pv = t.value(t.input(self, 0));
                         for (std::size_t i = 0; i < n; ++i) {
                           const double q = pv[i];
                           if (q < kProbClamp || q > 1.0 - kProbClamp) continue;
                           const double y = labels[i];
                           (*gp)[i] += g * (-y / q + (1.0 - y) / (1.0 - q));
                         }
                       });
}

}  // namespace cru
