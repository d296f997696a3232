#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cru/layers.hpp"

namespace cru {

/// Cell families: the plain GRU baseline and the three contextual fusions.
enum class Variant { gru, shallow, deep, deep_enhanced };

Variant parse_variant(const std::string& name);
const char* variant_name(Variant v);
inline constexpr Variant kAllVariants[] = {Variant::gru, Variant::shallow, Variant::deep,
                                           Variant::deep_enhanced};

/// GRU gate parameters. Deep fusion drops the input matrices W_*, in which
/// case W_z/W_r/W_h are left empty.
struct GruParams {
  Param W_z, W_r, W_h;  // [d_h x d_in]
  Param U_z, U_r, U_h;  // [d_h x d_h]
  Param b_z, b_r, b_h;  // [d_h]
  bool has_input_matrices = true;

  static GruParams create(const std::string& prefix, std::size_t d_in, std::size_t d_h, Rng& rng,
                          bool with_input_matrices = true);
  static GruParams zeros(const std::string& prefix, std::size_t d_in, std::size_t d_h,
                         bool with_input_matrices = true);

  std::size_t hidden_dim() const { return U_z.value.dim(0); }

  struct Bound {
    Var W_z, W_r, W_h, U_z, U_r, U_h, b_z, b_r, b_h;
    bool has_input_matrices;
  };
  Bound bind(Tape& tape);
  void collect(std::vector<Param*>& out);
};

/// Parameters of one recurrent cell of any variant.
///
/// shallow: a single bank (conv_h) feeds an unmodified GRU.
/// deep: three unshared banks feed the gates directly; requires d_h == d.
/// deep_enhanced: gate inputs are W_*(conv_*(e) + e).
struct Cell {
  Variant variant = Variant::gru;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  GruParams gru;
  std::optional<ConvBank> conv_z, conv_r, conv_h;

  /// Throws ConfigError for an even filter length or a deep cell with
  /// hidden_dim != input_dim.
  static Cell create(const std::string& prefix, Variant variant, std::size_t input_dim,
                     std::size_t hidden_dim, std::size_t filter_length, Rng& rng,
                     Activation conv_activation = Activation::relu);

  std::vector<Param*> params();

  struct Bound {
    Variant variant;
    std::size_t input_dim;
    std::size_t hidden_dim;
    GruParams::Bound gru;
    std::optional<ConvBank::Bound> conv_z, conv_r, conv_h;
  };
  Bound bind(Tape& tape);
};

/// z = σ(W_z x + U_z h + b_z); r = σ(W_r x + U_r h + b_r);
/// h̃ = tanh(W x + U (r ⊙ h) + b_h); h_t = z ⊙ h_prev + (1 - z) ⊙ h̃.
/// x/h may be vectors or row batches.
Var gru_step(const GruParams::Bound& p, Var x, Var h_prev);

/// Deep fusion step on precomputed conv outputs: the conv features replace W_* x.
Var cru_deep_step(const Cell::Bound& cell, Var c_z, Var c_r, Var c_h, Var h_prev);

/// Deep-enhanced step: gate inputs are W_*(c_* + e_t).
Var cru_deep_enhanced_step(const Cell::Bound& cell, Var c_z, Var c_r, Var c_h, Var e_t,
                           Var h_prev);

/// Shallow fusion over a whole sequence: C = conv_h(E), then a GRU over C.
/// E is [n x d]; returns all hidden states [n x d_h].
Var cru_shallow_forward(const Cell::Bound& cell, Var e, Var h0);

struct SequenceOutput {
  Var all_h;    // [n x d_h] or [n x B x d_h]
  Var final_h;  // [d_h] or [B x d_h]
};

/// Runs a cell left to right. `e` is [n x d] or time-major [n x B x d].
/// `lengths` (one per batch column, 1..n) marks true tokens; positions past a
/// column's length copy the previous state, so final_h is the state at the
/// last true token. An invalid h0 means the zero vector.
SequenceOutput run_sequence(const Cell::Bound& cell, Var e, Var h0 = {},
                            std::span<const std::size_t> lengths = {});

struct BidirectionalOutput {
  Var per_position;  // [n x 2d_h] or [n x B x 2d_h]
  Var final_pair;    // [2d_h] or [B x 2d_h]: [forward at last true token ; backward at first]
};

/// The backward cell reads each column's true-token prefix reversed; its
/// outputs are re-reversed before concatenation with the forward outputs.
BidirectionalOutput run_bidirectional(const Cell::Bound& fwd, const Cell::Bound& bwd, Var e,
                                      std::span<const std::size_t> lengths = {});

/// Time-major index map reversing each column's first lengths[b] positions
/// (padding positions map to themselves). Entry t * B + b is the source row.
std::vector<std::size_t> reversal_index(std::size_t n, std::span<const std::size_t> lengths);

}  // namespace cru
