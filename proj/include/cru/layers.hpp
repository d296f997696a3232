#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "cru/autodiff.hpp"

namespace cru {

using Rng = std::mt19937_64;

/// Uniform(-limit, limit) tensor.
Tensor uniform_tensor(Shape shape, double limit, Rng& rng);
/// Glorot/Xavier uniform limit sqrt(6 / (fan_in + fan_out)).
double glorot_limit(std::size_t fan_in, std::size_t fan_out);

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnkId = 1;

/// Word embedding matrix [V x d]. The pad row is looked up like any other
/// row; padded positions are masked by the consumer.
struct EmbeddingTable {
  Param weights;
  std::size_t pad_id = kPadId;
  std::size_t unk_id = kUnkId;
  bool trainable = true;

  static EmbeddingTable uniform(std::size_t vocab_size, std::size_t dim, double limit, Rng& rng);

  std::size_t vocab_size() const { return weights.value.dim(0); }
  std::size_t dim() const { return weights.value.dim(1); }
};

/// Rows of the table for each id, [n x d]. Gradients land on looked-up rows only.
Var embed_lookup(Var table, std::span<const std::size_t> ids);

/// d_out filters of width k spanning the full input embedding.
struct ConvBank {
  Param filters;  // [d_out x k x d_in]
  Param bias;     // [d_out]
  std::size_t k = 1;
  Activation activation = Activation::relu;

  /// Throws ConfigError for even or zero k.
  static ConvBank create(const std::string& name, std::size_t d_out, std::size_t d_in,
                         std::size_t k, Activation activation, Rng& rng);
  /// Identity 1-tap bank: filters[o][0][c] = (o == c), zero bias.
  static ConvBank identity(const std::string& name, std::size_t d, Activation activation);

  std::size_t d_out() const { return filters.value.dim(0); }
  std::size_t d_in() const { return filters.value.dim(2); }

  struct Bound {
    Var filters;
    Var bias;
    Activation activation;
  };
  Bound bind(Tape& tape) { return {tape.param(filters), tape.param(bias), activation}; }
  void collect(std::vector<Param*>& out) {
    out.push_back(&filters);
    out.push_back(&bias);
  }
};

/// Same-length convolution: zero-pads (k-1)/2 rows per side so an [n x d]
/// (or time-major [n x B x d]) input yields an output with the same leading
/// dims. Row i is f(sum_j filters[:, j, :] . e_padded[i + j] + bias).
Var same_length_conv(const ConvBank::Bound& bank, Var e);

struct DenseLayer {
  Param weight;  // [out x in]
  Param bias;    // [out]
  Activation activation = Activation::identity;

  static DenseLayer create(const std::string& name, std::size_t out, std::size_t in,
                           Activation activation, Rng& rng);

  std::size_t in_dim() const { return weight.value.dim(1); }
  std::size_t out_dim() const { return weight.value.dim(0); }

  struct Bound {
    Var weight;
    Var bias;
    Activation activation;
  };
  Bound bind(Tape& tape) { return {tape.param(weight), tape.param(bias), activation}; }
  void collect(std::vector<Param*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

Var dense_forward(const DenseLayer::Bound& layer, Var x);

enum class Mode { train, eval };

/// Inverted-dropout keep mask: entries are 0 with probability `rate`,
/// otherwise 1 / (1 - rate).
Tensor dropout_mask(const Shape& shape, double rate, Rng& rng);

/// Identity in eval mode or when rate == 0; otherwise x * dropout_mask.
/// Throws ConfigError unless 0 <= rate < 1.
Var dropout_apply(Var x, double rate, Mode mode, Rng& rng);

void check_dropout_rate(double rate);

}  // namespace cru
