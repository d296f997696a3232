#include "cru/layers.hpp"

#include <cmath>

#include "cru/errors.hpp"

namespace cru {

Tensor uniform_tensor(Shape shape, double limit, Rng& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

EmbeddingTable EmbeddingTable::uniform(std::size_t vocab_size, std::size_t dim, double limit,
                                       Rng& rng) {
  EmbeddingTable table;
  table.weights = Param("embedding.weight", uniform_tensor({vocab_size, dim}, limit, rng));
  return table;
}

Var embed_lookup(Var table, std::span<const std::size_t> ids) {
  if (ids.empty()) throw ContractError("embed_lookup needs a non-empty id sequence");
  return gather_rows(table, ids);
}

ConvBank ConvBank::create(const std::string& name, std::size_t d_out, std::size_t d_in,
                          std::size_t k, Activation activation, Rng& rng) {
  if (k == 0 || k % 2 == 0) {
    throw ConfigError("filter length must be odd and >= 1, got " + std::to_string(k));
  }
  ConvBank bank;
  bank.k = k;
  bank.activation = activation;
  const double limit = glorot_limit(k * d_in, d_out);
  bank.filters = Param(name + ".filters", uniform_tensor({d_out, k, d_in}, limit, rng));
  bank.bias = Param(name + ".bias", Tensor({d_out}));
  return bank;
}

ConvBank ConvBank::identity(const std::string& name, std::size_t d, Activation activation) {
  ConvBank bank;
  bank.k = 1;
  bank.activation = activation;
  Tensor f({d, 1, d});
  for (std::size_t o = 0; o < d; ++o) f.at(o, 0, o) = 1.0;
  bank.filters = Param(name + ".filters", std::move(f));
  bank.bias = Param(name + ".bias", Tensor({d}));
  return bank;
}

Var same_length_conv(const ConvBank::Bound& bank, Var e) {
  return activate(bank.activation, conv_same(e, bank.filters, bank.bias));
}

DenseLayer DenseLayer::create(const std::string& name, std::size_t out, std::size_t in,
                              Activation activation, Rng& rng) {
  DenseLayer layer;
  layer.activation = activation;
  layer.weight = Param(name + ".weight", uniform_tensor({out, in}, glorot_limit(in, out), rng));
  layer.bias = Param(name + ".bias", Tensor({out}));
  return layer;
}

Var dense_forward(const DenseLayer::Bound& layer, Var x) {
  return activate(layer.activation, linear(x, layer.weight, layer.bias));
}

void check_dropout_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
}

Tensor dropout_mask(const Shape& shape, double rate, Rng& rng) {
  check_dropout_rate(rate);
  Tensor mask(shape);
  std::bernoulli_distribution drop(rate);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto& v : mask.data()) v = drop(rng) ? 0.0 : keep_scale;
  return mask;
}

Var dropout_apply(Var x, double rate, Mode mode, Rng& rng) {
  check_dropout_rate(rate);
  if (mode == Mode::eval || rate == 0.0) return x;
  return mul(x, x.tape().constant(dropout_mask(x.shape(), rate, rng)));
}

}  // namespace cru
