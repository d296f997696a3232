#include "cru/recurrent.hpp"

#include <algorithm>

#include "cru/errors.hpp"

namespace cru {

Variant parse_variant(const std::string& name) {
  if (name == "gru") return Variant::gru;
  if (name == "shallow") return Variant::shallow;
  if (name == "deep") return Variant::deep;
  if (name == "deep_enhanced" || name == "deep-enhanced") return Variant::deep_enhanced;
  throw ConfigError("unknown variant '" + name + "' (expected gru|shallow|deep|deep_enhanced)");
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::gru: return "gru";
    case Variant::shallow: return "shallow";
    case Variant::deep: return "deep";
    case Variant::deep_enhanced: return "deep_enhanced";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

GruParams GruParams::create(const std::string& prefix, std::size_t d_in, std::size_t d_h,
                            Rng& rng, bool with_input_matrices) {
  GruParams p;
  p.has_input_matrices = with_input_matrices;
  const double wl = glorot_limit(d_in, d_h);
  const double ul = glorot_limit(d_h, d_h);
  if (with_input_matrices) {
    p.W_z = Param(prefix + ".W_z", uniform_tensor({d_h, d_in}, wl, rng));
    p.W_r = Param(prefix + ".W_r", uniform_tensor({d_h, d_in}, wl, rng));
    p.W_h = Param(prefix + ".W_h", uniform_tensor({d_h, d_in}, wl, rng));
  }
  p.U_z = Param(prefix + ".U_z", uniform_tensor({d_h, d_h}, ul, rng));
  p.U_r = Param(prefix + ".U_r", uniform_tensor({d_h, d_h}, ul, rng));
  p.U_h = Param(prefix + ".U_h", uniform_tensor({d_h, d_h}, ul, rng));
  p.b_z = Param(prefix + ".b_z", Tensor({d_h}));
  p.b_r = Param(prefix + ".b_r", Tensor({d_h}));
  p.b_h = Param(prefix + ".b_h", Tensor({d_h}));
  return p;
}

GruParams GruParams::zeros(const std::string& prefix, std::size_t d_in, std::size_t d_h,
                           bool with_input_matrices) {
  GruParams p;
  p.has_input_matrices = with_input_matrices;
  if (with_input_matrices) {
    p.W_z = Param(prefix + ".W_z", Tensor({d_h, d_in}));
    p.W_r = Param(prefix + ".W_r", Tensor({d_h, d_in}));
    p.W_h = Param(prefix + ".W_h", Tensor({d_h, d_in}));
  }
  p.U_z = Param(prefix + ".U_z", Tensor({d_h, d_h}));
  p.U_r = Param(prefix + ".U_r", Tensor({d_h, d_h}));
  p.U_h = Param(prefix + ".U_h", Tensor({d_h, d_h}));
  p.b_z = Param(prefix + ".b_z", Tensor({d_h}));
  p.b_r = Param(prefix + ".b_r", Tensor({d_h}));
  p.b_h = Param(prefix + ".b_h", Tensor({d_h}));
  return p;
}

GruParams::Bound GruParams::bind(Tape& tape) {
  Bound b;
  b.has_input_matrices = has_input_matrices;
  if (has_input_matrices) {
    b.W_z = tape.param(W_z);
    b.W_r = tape.param(W_r);
    b.W_h = tape.param(W_h);
  }
  b.U_z = tape.param(U_z);
  b.U_r = tape.param(U_r);
  b.U_h = tape.param(U_h);
  b.b_z = tape.param(b_z);
  b.b_r = tape.param(b_r);
  b.b_h = tape.param(b_h);
  return b;
}

void GruParams::collect(std::vector<Param*>& out) {
  if (has_input_matrices) {
    out.push_back(&W_z);
    out.push_back(&W_r);
    out.push_back(&W_h);
  }
  for (Param* p : {&U_z, &U_r, &U_h, &b_z, &b_r, &b_h}) out.push_back(p);
}

Cell Cell::create(const std::string& prefix, Variant variant, std::size_t input_dim,
                  std::size_t hidden_dim, std::size_t filter_length, Rng& rng,
                  Activation conv_activation) {
  if (variant == Variant::deep && hidden_dim != input_dim) {
    throw ConfigError("deep fusion requires hidden == embed (got hidden " +
                      std::to_string(hidden_dim) + ", embed " + std::to_string(input_dim) + ")");
  }
  if (variant != Variant::gru && (filter_length == 0 || filter_length % 2 == 0)) {
    throw ConfigError("filter length must be odd and >= 1, got " + std::to_string(filter_length));
  }
  Cell cell;
  cell.variant = variant;
  cell.input_dim = input_dim;
  cell.hidden_dim = hidden_dim;
  switch (variant) {
    case Variant::gru:
      break;
    case Variant::shallow:
      cell.conv_h = ConvBank::create(prefix + ".conv_h", input_dim, input_dim, filter_length,
                                     conv_activation, rng);
      break;
    case Variant::deep:
    case Variant::deep_enhanced:
      cell.conv_z = ConvBank::create(prefix + ".conv_z", input_dim, input_dim, filter_length,
                                     conv_activation, rng);
      cell.conv_r = ConvBank::create(prefix + ".conv_r", input_dim, input_dim, filter_length,
                                     conv_activation, rng);
      cell.conv_h = ConvBank::create(prefix + ".conv_h", input_dim, input_dim, filter_length,
                                     conv_activation, rng);
      break;
  }
  cell.gru = GruParams::create(prefix, input_dim, hidden_dim, rng, variant != Variant::deep);
  return cell;
}

std::vector<Param*> Cell::params() {
  std::vector<Param*> out;
  for (auto* bank : {&conv_z, &conv_r, &conv_h}) {
    if (*bank) (*bank)->collect(out);
  }
  gru.collect(out);
  return out;
}

Cell::Bound Cell::bind(Tape& tape) {
  Bound b{variant, input_dim, hidden_dim, gru.bind(tape), {}, {}, {}};
  if (conv_z) b.conv_z = conv_z->bind(tape);
  if (conv_r) b.conv_r = conv_r->bind(tape);
  if (conv_h) b.conv_h = conv_h->bind(tape);
  return b;
}

// ---------------------------------------------------------------------------
// Steps
// ---------------------------------------------------------------------------

namespace {

/// Shared recurrence given the input-side pre-activations (bias included).
Var gate_update(const GruParams::Bound& p, Var in_z, Var in_r, Var in_h, Var h_prev) {
  Var z = sigmoid(add(in_z, matmul_nt(h_prev, p.U_z)));
  Var r = sigmoid(add(in_r, matmul_nt(h_prev, p.U_r)));
  Var candidate = tanh(add(in_h, matmul_nt(mul(r, h_prev), p.U_h)));
  return add(mul(z, h_prev), mul(one_minus(z), candidate));
}

void require_variant(const Cell::Bound& cell, Variant v, const char* op) {
  if (cell.variant != v) {
    throw ContractError(std::string(op) + " called on a " + variant_name(cell.variant) + " cell");
  }
}

}  // namespace

Var gru_step(const GruParams::Bound& p, Var x, Var h_prev) {
  if (!p.has_input_matrices) throw ContractError("gru_step needs input matrices W_*");
  return gate_update(p, linear(x, p.W_z, p.b_z), linear(x, p.W_r, p.b_r),
                     linear(x, p.W_h, p.b_h), h_prev);
}

Var cru_deep_step(const Cell::Bound& cell, Var c_z, Var c_r, Var c_h, Var h_prev) {
  require_variant(cell, Variant::deep, "cru_deep_step");
  if (cell.hidden_dim != cell.input_dim) {
    throw ConfigError("deep fusion requires hidden == embed");
  }
  const auto& p = cell.gru;
  return gate_update(p, add_bias(c_z, p.b_z), add_bias(c_r, p.b_r), add_bias(c_h, p.b_h),
                     h_prev);
}

Var cru_deep_enhanced_step(const Cell::Bound& cell, Var c_z, Var c_r, Var c_h, Var e_t,
                           Var h_prev) {
  require_variant(cell, Variant::deep_enhanced, "cru_deep_enhanced_step");
  const auto& p = cell.gru;
  return gate_update(p, linear(add(c_z, e_t), p.W_z, p.b_z), linear(add(c_r, e_t), p.W_r, p.b_r),
                     linear(add(c_h, e_t), p.W_h, p.b_h), h_prev);
}

Var cru_shallow_forward(const Cell::Bound& cell, Var e, Var h0) {
  require_variant(cell, Variant::shallow, "cru_shallow_forward");
  if (e.value().rank() != 2) throw DimensionError("cru_shallow_forward expects E as [n x d]");
  return run_sequence(cell, e, h0).all_h;
}

// ---------------------------------------------------------------------------
// Sequence runners
// ---------------------------------------------------------------------------

namespace {

struct Projections {
  Var z, r, h;  // time-major [n x B x d_h]
};

/// Input-side pre-activations for every position at once. Row-wise this is
/// the same arithmetic as the per-step functions.
Projections project_inputs(const Cell::Bound& cell, Var x) {
  const auto& p = cell.gru;
  switch (cell.variant) {
    case Variant::gru:
      return {linear(x, p.W_z, p.b_z), linear(x, p.W_r, p.b_r), linear(x, p.W_h, p.b_h)};
    case Variant::shallow: {
      Var c = same_length_conv(*cell.conv_h, x);
      return {linear(c, p.W_z, p.b_z), linear(c, p.W_r, p.b_r), linear(c, p.W_h, p.b_h)};
    }
    case Variant::deep: {
      Var cz = same_length_conv(*cell.conv_z, x);
      Var cr = same_length_conv(*cell.conv_r, x);
      Var ch = same_length_conv(*cell.conv_h, x);
      return {add_bias(cz, p.b_z), add_bias(cr, p.b_r), add_bias(ch, p.b_h)};
    }
    case Variant::deep_enhanced: {
      Var cz = same_length_conv(*cell.conv_z, x);
      Var cr = same_length_conv(*cell.conv_r, x);
      Var ch = same_length_conv(*cell.conv_h, x);
      return {linear(add(cz, x), p.W_z, p.b_z), linear(add(cr, x), p.W_r, p.b_r),
              linear(add(ch, x), p.W_h, p.b_h)};
    }
  }
  throw ContractError("unknown variant");
}

}  // namespace

SequenceOutput run_sequence(const Cell::Bound& cell, Var e, Var h0,
                            std::span<const std::size_t> lengths) {
  Tape& tape = e.tape();
  const Tensor& ev = e.value();
  if (ev.rank() != 2 && ev.rank() != 3) {
    throw DimensionError("run_sequence expects [n x d] or [n x B x d], got " + to_string(ev.shape()));
  }
  const bool single = ev.rank() == 2;
  const std::size_t n = ev.dim(0);
  const std::size_t batch = single ? 1 : ev.dim(1);
  const std::size_t d = ev.shape().back();
  const std::size_t dh = cell.hidden_dim;
  if (d != cell.input_dim) {
    throw DimensionError("run_sequence: input width " + std::to_string(d) + " but cell expects " +
                         std::to_string(cell.input_dim));
  }
  if (!lengths.empty() && lengths.size() != batch) {
    throw DimensionError("run_sequence: " + std::to_string(lengths.size()) + " lengths for batch " +
                         std::to_string(batch));
  }
  for (auto len : lengths) {
    if (len == 0) throw ContractError("run_sequence: zero-length sequence");
    if (len > n) throw DimensionError("run_sequence: length exceeds padded width");
  }
  const bool masked =
      !lengths.empty() && std::any_of(lengths.begin(), lengths.end(), [n](auto l) { return l < n; });

  Var x = single ? reshape(e, {n, 1, d}) : e;
  if (masked && cell.variant != Variant::gru) {
    // Padding must not leak into the context windows of true tokens.
    Tensor keep({n, batch, d});
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t b = 0; b < batch; ++b) {
        if (t < lengths[b]) std::fill_n(keep.raw() + (t * batch + b) * d, d, 1.0);
      }
    }
    x = mul(x, tape.constant(std::move(keep)));
  }

  Projections proj = project_inputs(cell, x);

  Var h;
  if (h0.valid()) {
    if (h0.value().numel() != batch * dh) {
      throw DimensionError("run_sequence: h0 " + to_string(h0.shape()) + " does not match [" +
                           std::to_string(batch) + "x" + std::to_string(dh) + "]");
    }
    h = h0.shape() == Shape{batch, dh} ? h0 : reshape(h0, {batch, dh});
  } else {
    h = tape.constant(Tensor({batch, dh}));
  }

  std::vector<Var> states;
  states.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    Var next = gate_update(cell.gru, take(proj.z, t), take(proj.r, t), take(proj.h, t), h);
    if (masked && std::any_of(lengths.begin(), lengths.end(), [t](auto l) { return t >= l; })) {
      Tensor live({batch, dh});
      for (std::size_t b = 0; b < batch; ++b) {
        if (t < lengths[b]) std::fill_n(live.raw() + b * dh, dh, 1.0);
      }
      Var m = tape.constant(std::move(live));
      next = add(mul(m, next), mul(one_minus(m), h));
    }
    h = next;
    states.push_back(reshape(h, {1, batch, dh}));
  }

  Var all = concat_rows(states);
  if (single) return {reshape(all, {n, dh}), reshape(h, {dh})};
  return {all, h};
}

std::vector<std::size_t> reversal_index(std::size_t n, std::span<const std::size_t> lengths) {
  const std::size_t batch = lengths.size();
  std::vector<std::size_t> idx(n * batch);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t len = lengths[b];
      const std::size_t src = t < len ? len - 1 - t : t;
      idx[t * batch + b] = src * batch + b;
    }
  }
  return idx;
}

BidirectionalOutput run_bidirectional(const Cell::Bound& fwd, const Cell::Bound& bwd, Var e,
                                      std::span<const std::size_t> lengths) {
  if (fwd.hidden_dim != bwd.hidden_dim) {
    throw DimensionError("bidirectional cells differ in hidden size: " +
                         std::to_string(fwd.hidden_dim) + " vs " + std::to_string(bwd.hidden_dim));
  }
  const Tensor& ev = e.value();
  if (ev.rank() != 2 && ev.rank() != 3) {
    throw DimensionError("run_bidirectional expects [n x d] or [n x B x d]");
  }
  const bool single = ev.rank() == 2;
  const std::size_t n = ev.dim(0);
  const std::size_t batch = single ? 1 : ev.dim(1);
  const std::size_t d = ev.shape().back();
  const std::size_t dh = fwd.hidden_dim;

  std::vector<std::size_t> lens(lengths.begin(), lengths.end());
  if (lens.empty()) lens.assign(batch, n);
  if (lens.size() != batch) throw DimensionError("run_bidirectional: lengths do not match batch");

  Var x = single ? reshape(e, {n, 1, d}) : e;
  SequenceOutput forward = run_sequence(fwd, x, {}, lens);

  const auto rev = reversal_index(n, lens);
  Var x_rev = reshape(gather_rows(reshape(x, {n * batch, d}), rev), {n, batch, d});
  SequenceOutput backward = run_sequence(bwd, x_rev, {}, lens);
  Var back_aligned =
      reshape(gather_rows(reshape(backward.all_h, {n * batch, dh}), rev), {n, batch, dh});

  const Var per_pos_parts[] = {forward.all_h, back_aligned};
  const Var final_parts[] = {forward.final_h, backward.final_h};
  Var per_position = concat_last(per_pos_parts);
  Var final_pair = concat_last(final_parts);
  if (single) return {reshape(per_position, {n, 2 * dh}), reshape(final_pair, {2 * dh})};
  return {per_position, final_pair};
}

}  // namespace cru
