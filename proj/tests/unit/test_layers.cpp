#include <gtest/gtest.h>

#include "cru/errors.hpp"
#include "cru/layers.hpp"
#include "test_support.hpp"

using namespace cru;
using cru::testing::max_rel_err;
using cru::testing::numeric_grad;
using cru::testing::random_tensor;
using cru::testing::reference_conv;

namespace {

ConvBank bank_from(Tensor filters, Tensor bias, Activation act) {
  ConvBank b;
  b.k = filters.dim(1);
  b.activation = act;
  b.filters = Param("f", std::move(filters));
  b.bias = Param("b", std::move(bias));
  return b;
}

Tensor conv_value(ConvBank& bank, const Tensor& e) {
  Tape tape;
  return same_length_conv(bank.bind(tape), tape.constant(e)).value();
}

}  // namespace

TEST(EmbedLookup, PermutationOfIdentity) {
  Tape tape;
  auto table = tape.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  const std::size_t ids[] = {1, 0};
  auto out = embed_lookup(table, ids).value();
  EXPECT_EQ(Tensor::max_abs_diff(out, Tensor::matrix({{0, 1}, {1, 0}})), 0.0);
}

TEST(EmbedLookup, RepeatedIdAccumulates) {
  std::mt19937_64 rng(1);
  const Tensor table0 = random_tensor({3, 2}, rng);
  const Tensor w = random_tensor({2, 2}, rng);
  const std::size_t ids[] = {0, 0};
  Tape tape;
  auto table = tape.variable(table0);
  tape.backward(sum(mul(embed_lookup(table, ids), tape.constant(w))));
  auto numeric = numeric_grad(
      [&](const Tensor& t) {
        Tape tp;
        return sum(mul(embed_lookup(tp.constant(t), ids), tp.constant(w))).value().item();
      },
      table0);
  EXPECT_LT(max_rel_err(table.grad(), numeric), 1e-8);
  EXPECT_NEAR(table.grad().at(0, 0), w.at(0, 0) + w.at(1, 0), 1e-15);
  EXPECT_EQ(table.grad().at(1, 0), 0.0);
  EXPECT_EQ(table.grad().at(2, 1), 0.0);
}

TEST(EmbedLookup, Errors) {
  Tape tape;
  auto table = tape.constant(Tensor({2, 2}));
  const std::size_t bad[] = {2};
  EXPECT_THROW(embed_lookup(table, bad), IndexError);
  EXPECT_THROW(embed_lookup(table, std::span<const std::size_t>{}), ContractError);
}

TEST(SameLengthConv, OneTapIdentity) {
  std::mt19937_64 rng(2);
  auto bank = ConvBank::identity("id", 3, Activation::identity);
  const Tensor e = random_tensor({5, 3}, rng);
  EXPECT_EQ(Tensor::max_abs_diff(conv_value(bank, e), e), 0.0);
}

TEST(SameLengthConv, HandOracleOnes) {
  auto bank = bank_from(Tensor({1, 3, 1}, {1, 1, 1}), Tensor({1}), Activation::identity);
  const Tensor e({4, 1}, {1, 2, 3, 4});
  const Tensor expected({4, 1}, {3, 6, 9, 7});
  EXPECT_EQ(Tensor::max_abs_diff(conv_value(bank, e), expected), 0.0);
}

TEST(SameLengthConv, SingleRowUsesCenterTapOnly) {
  std::mt19937_64 rng(3);
  for (std::size_t k : {1u, 3u, 5u, 7u}) {
    const Tensor f = random_tensor({2, k, 2}, rng);
    const Tensor b = random_tensor({2}, rng);
    auto bank = bank_from(f, b, Activation::relu);
    const Tensor e = random_tensor({1, 2}, rng);
    const auto out = conv_value(bank, e);
    const std::size_t c = (k - 1) / 2;
    for (std::size_t o = 0; o < 2; ++o) {
      const double pre = f.at(o, c, 0) * e.at(0, 0) + f.at(o, c, 1) * e.at(0, 1) + b[o];
      EXPECT_NEAR(out.at(0, o), pre > 0 ? pre : 0.0, 1e-15);
    }
  }
}

TEST(SameLengthConv, MatchesReferenceAndPreservesShape) {
  std::mt19937_64 rng(4);
  for (std::size_t k : {1u, 3u, 5u, 7u}) {
    for (std::size_t n : {1u, 2u, 6u, 11u}) {
      for (std::size_t d : {1u, 3u}) {
        const Tensor f = random_tensor({d, k, d}, rng);
        const Tensor b = random_tensor({d}, rng);
        auto bank = bank_from(f, b, Activation::identity);
        const Tensor e = random_tensor({n, d}, rng);
        const auto out = conv_value(bank, e);
        ASSERT_EQ(out.shape(), e.shape());
        EXPECT_LT(Tensor::max_abs_diff(out, reference_conv(e, f, b)), 1e-13);
      }
    }
  }
}

TEST(SameLengthConv, Errors) {
  std::mt19937_64 rng(5);
  EXPECT_THROW(ConvBank::create("c", 3, 3, 2, Activation::relu, rng), ConfigError);
  EXPECT_THROW(ConvBank::create("c", 3, 3, 0, Activation::relu, rng), ConfigError);
  auto bank = ConvBank::create("c", 3, 3, 3, Activation::relu, rng);
  Tape tape;
  EXPECT_THROW(same_length_conv(bank.bind(tape), tape.constant(Tensor({4, 2}))), DimensionError);
}

TEST(SameLengthConv, Linearity) {
  std::mt19937_64 rng(6);
  auto bank = bank_from(random_tensor({3, 3, 3}, rng), Tensor({3}), Activation::identity);
  const Tensor x = random_tensor({6, 3}, rng);
  const Tensor y = random_tensor({6, 3}, rng);
  const double alpha = 0.7, beta = -1.3;
  Tensor mix = x;
  for (std::size_t i = 0; i < mix.numel(); ++i) mix[i] = alpha * x[i] + beta * y[i];
  const auto cx = conv_value(bank, x);
  const auto cy = conv_value(bank, y);
  const auto cm = conv_value(bank, mix);
  for (std::size_t i = 0; i < cm.numel(); ++i) EXPECT_NEAR(cm[i], alpha * cx[i] + beta * cy[i], 1e-12);
}

TEST(SameLengthConv, TranslationConsistency) {
  std::mt19937_64 rng(7);
  const std::size_t n = 9, d = 2, k = 3;
  auto bank = bank_from(random_tensor({d, k, d}, rng), random_tensor({d}, rng), Activation::relu);
  const Tensor x = random_tensor({n, d}, rng);
  Tensor shifted({n, d});
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) shifted.at(i, c) = x.at(i - 1, c);
  const auto cx = conv_value(bank, x);
  const auto cs = conv_value(bank, shifted);
  // Rows whose receptive field avoids both boundaries in both inputs.
  for (std::size_t i = 2; i + 1 < n; ++i)
    for (std::size_t c = 0; c < d; ++c) EXPECT_NEAR(cs.at(i, c), cx.at(i - 1, c), 1e-14);
}

TEST(SameLengthConv, BatchedTimeMajorMatchesPerColumn) {
  std::mt19937_64 rng(8);
  auto bank = ConvBank::create("c", 3, 3, 5, Activation::relu, rng);
  const Tensor batched = random_tensor({4, 2, 3}, rng);
  const auto out = conv_value(bank, batched);
  for (std::size_t b = 0; b < 2; ++b) {
    Tensor col({4, 3});
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t c = 0; c < 3; ++c) col.at(t, c) = batched.at(t, b, c);
    const auto single = conv_value(bank, col);
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.at(t, b, c), single.at(t, c));
  }
}

TEST(SameLengthConv, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(9);
  const Tensor f0 = random_tensor({3, 3, 2}, rng);
  const Tensor b0 = random_tensor({3}, rng);
  const Tensor e0 = random_tensor({5, 2}, rng);
  const Tensor w = random_tensor({5, 3}, rng);
  auto loss = [&](const Tensor& f, const Tensor& b, const Tensor& e) {
    Tape t;
    return sum(mul(cru::tanh(conv_same(t.constant(e), t.constant(f), t.constant(b))), t.constant(w)))
        .value()
        .item();
  };
  Tape tape;
  auto f = tape.variable(f0);
  auto b = tape.variable(b0);
  auto e = tape.variable(e0);
  tape.backward(sum(mul(cru::tanh(conv_same(e, f, b)), tape.constant(w))));
  EXPECT_LT(max_rel_err(f.grad(), numeric_grad([&](const Tensor& x) { return loss(x, b0, e0); }, f0)), 1e-7);
  EXPECT_LT(max_rel_err(b.grad(), numeric_grad([&](const Tensor& x) { return loss(f0, x, e0); }, b0)), 1e-7);
  EXPECT_LT(max_rel_err(e.grad(), numeric_grad([&](const Tensor& x) { return loss(f0, b0, x); }, e0)), 1e-7);
}

TEST(Dense, IdentityAndBiasOnly) {
  std::mt19937_64 rng(10);
  DenseLayer layer = DenseLayer::create("d", 3, 3, Activation::identity, rng);
  layer.weight.value = Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const Tensor x = Tensor::vector({0.5, -2, 3});
  {
    Tape tape;
    auto y = dense_forward(layer.bind(tape), tape.constant(x)).value();
    EXPECT_EQ(Tensor::max_abs_diff(y, x), 0.0);
  }
  layer.weight.value.fill(0.0);
  layer.bias.value = Tensor::vector({1, 2, 3});
  Tape tape;
  auto y = dense_forward(layer.bind(tape), tape.constant(x)).value();
  EXPECT_EQ(Tensor::max_abs_diff(y, layer.bias.value), 0.0);
}

TEST(Dense, DimensionMismatch) {
  std::mt19937_64 rng(11);
  DenseLayer layer = DenseLayer::create("d", 2, 3, Activation::relu, rng);
  Tape tape;
  EXPECT_THROW(dense_forward(layer.bind(tape), tape.constant(Tensor({4}))), DimensionError);
}

TEST(Dropout, RateZeroAndEvalAreIdentity) {
  std::mt19937_64 rng(12);
  Tape tape;
  auto x = tape.constant(random_tensor({10}, rng));
  EXPECT_EQ(dropout_apply(x, 0.0, Mode::train, rng).id(), x.id());
  EXPECT_EQ(dropout_apply(x, 0.0, Mode::eval, rng).id(), x.id());
  EXPECT_EQ(dropout_apply(x, 0.5, Mode::eval, rng).id(), x.id());
}

TEST(Dropout, RateOutOfRange) {
  std::mt19937_64 rng(13);
  Tape tape;
  auto x = tape.constant(Tensor({3}));
  EXPECT_THROW(dropout_apply(x, 1.0, Mode::train, rng), ConfigError);
  EXPECT_THROW(dropout_apply(x, -0.1, Mode::eval, rng), ConfigError);
}

TEST(Dropout, LawOfLargeNumbers) {
  std::mt19937_64 rng(14);
  const std::size_t n = 100000;
  Tensor x({n});
  std::uniform_real_distribution<double> pos(0.5, 1.5);
  for (auto& v : x.data()) v = pos(rng);
  Tape tape;
  auto y = dropout_apply(tape.constant(x), 0.5, Mode::train, rng).value();
  std::size_t zeros = 0;
  double in_mean = 0, out_mean = 0;
  for (std::size_t i = 0; i < n; ++i) {
    zeros += y[i] == 0.0;
    in_mean += x[i];
    out_mean += y[i];
    if (y[i] != 0.0) EXPECT_DOUBLE_EQ(y[i], 2.0 * x[i]);
  }
  EXPECT_NEAR(static_cast<double>(zeros) / n, 0.5, 0.01);
  EXPECT_NEAR(out_mean / in_mean, 1.0, 0.02);
}
