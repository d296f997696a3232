#include <gtest/gtest.h>

#include <cmath>

#include "cru/autodiff.hpp"
#include "cru/errors.hpp"
#include "cru/gradcheck.hpp"
#include "test_support.hpp"

using namespace cru;
using cru::testing::max_rel_err;
using cru::testing::numeric_grad;
using cru::testing::random_tensor;

TEST(Tensor, ShapeInvariant) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor(Shape{}), DimensionError);
  EXPECT_THROW(Tensor(Shape{1, 1, 1, 1}), DimensionError);
  Tensor t({2, 3});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_THROW(t.reshaped({4}), DimensionError);
}

TEST(Matmul, IdentityAndDot) {
  Tape tape;
  auto eye = tape.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  auto m = tape.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  EXPECT_EQ(Tensor::max_abs_diff(matmul(eye, m).value(), m.value()), 0.0);

  auto row = tape.constant(Tensor::matrix({{1, 2}}));
  auto col = tape.constant(Tensor::matrix({{3}, {4}}));
  auto r = matmul(row, col).value();
  EXPECT_EQ(r.shape(), (Shape{1, 1}));
  EXPECT_EQ(r[0], 11.0);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tape tape;
  auto a = tape.constant(Tensor({3, 4}));
  auto b = tape.constant(Tensor({3, 2}));
  try {
    matmul(a, b);
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[3x4]"), std::string::npos);
    EXPECT_NE(msg.find("[3x2]"), std::string::npos);
  }
}

TEST(Matmul, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  const Tensor a0 = random_tensor({3, 4}, rng);
  const Tensor b0 = random_tensor({4, 2}, rng);
  const Tensor w = random_tensor({3, 2}, rng);
  auto loss_of = [&](const Tensor& a, const Tensor& b) {
    Tape t;
    return sum(mul(matmul(t.constant(a), t.constant(b)), t.constant(w))).value().item();
  };
  Tape tape;
  auto a = tape.variable(a0);
  auto b = tape.variable(b0);
  tape.backward(sum(mul(matmul(a, b), tape.constant(w))));
  auto na = numeric_grad([&](const Tensor& x) { return loss_of(x, b0); }, a0);
  auto nb = numeric_grad([&](const Tensor& x) { return loss_of(a0, x); }, b0);
  EXPECT_LT(max_rel_err(a.grad(), na), 1e-6);
  EXPECT_LT(max_rel_err(b.grad(), nb), 1e-6);
}

TEST(Elementwise, Values) {
  Tape tape;
  auto z = mul(tape.constant(Tensor::vector({1, 2, 3})), tape.constant(Tensor::vector({0, 0, 0})));
  for (double v : z.value().data()) EXPECT_EQ(v, 0.0);
  auto s = add(tape.constant(Tensor::vector({1, 2})), tape.constant(Tensor::vector({3, 4})));
  EXPECT_EQ(s.value()[0], 4.0);
  EXPECT_EQ(s.value()[1], 6.0);
  auto d = sub(tape.constant(Tensor::vector({1, 2})), tape.constant(Tensor::vector({3, 5})));
  EXPECT_EQ(d.value()[1], -3.0);
}

TEST(Elementwise, ShapeMismatchThrowsButScalarBroadcasts) {
  Tape tape;
  auto a = tape.constant(Tensor::vector({1, 2}));
  auto b = tape.constant(Tensor::vector({1, 2, 3}));
  EXPECT_THROW(add(a, b), DimensionError);
  auto s = mul(tape.constant(Tensor::scalar(2.0)), b);
  EXPECT_EQ(s.value()[2], 6.0);
}

TEST(Elementwise, MulGradientIsOtherOperand) {
  std::mt19937_64 rng(3);
  const Tensor a0 = random_tensor({5}, rng);
  const Tensor b0 = random_tensor({5}, rng);
  Tape tape;
  auto a = tape.variable(a0);
  auto b = tape.constant(b0);
  tape.backward(sum(mul(a, b)));
  auto numeric = numeric_grad(
      [&](const Tensor& x) {
        Tape t;
        return sum(mul(t.constant(x), t.constant(b0))).value().item();
      },
      a0);
  EXPECT_LT(max_rel_err(a.grad(), b0), 1e-12);
  EXPECT_LT(max_rel_err(a.grad(), numeric), 1e-8);
}

TEST(Activation, Values) {
  Tape tape;
  EXPECT_EQ(sigmoid(tape.constant(Tensor::scalar(0))).value().item(), 0.5);
  EXPECT_EQ(cru::tanh(tape.constant(Tensor::scalar(0))).value().item(), 0.0);
  auto r = relu(tape.constant(Tensor::vector({-1, 2}))).value();
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 2.0);
  auto big = sigmoid(tape.constant(Tensor::vector({-800, 800}))).value();
  EXPECT_GE(big[0], 0.0);
  EXPECT_LE(big[1], 1.0);
}

TEST(Activation, ReluSubgradientAtZeroIsZero) {
  Tape tape;
  auto x = tape.variable(Tensor::vector({0.0, 1.0, -1.0}));
  tape.backward(sum(relu(x)));
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 1.0);
  EXPECT_EQ(x.grad()[2], 0.0);
}

TEST(Activation, NonFiniteInputRejected) {
  Tape tape;
  EXPECT_THROW(sigmoid(tape.constant(Tensor::scalar(std::nan("")))), NumericError);
}

TEST(Concat, RowsAndBackwardSplit) {
  Tape tape;
  auto a = tape.variable(Tensor::matrix({{1}}));
  auto b = tape.variable(Tensor::matrix({{2}}));
  const Var parts[] = {a, b};
  auto c = concat_rows(parts);
  EXPECT_EQ(c.value().shape(), (Shape{2, 1}));
  EXPECT_EQ(c.value()[1], 2.0);
  tape.backward(sum(c));
  EXPECT_EQ(a.grad()[0], 1.0);
  EXPECT_EQ(b.grad()[0], 1.0);

  const Var single[] = {a};
  EXPECT_EQ(Tensor::max_abs_diff(concat_rows(single).value(), a.value()), 0.0);

  auto bad = tape.constant(Tensor({1, 2}));
  const Var mismatched[] = {a, bad};
  EXPECT_THROW(concat_rows(mismatched), DimensionError);
}

TEST(Concat, LastAxisGradient) {
  std::mt19937_64 rng(11);
  const Tensor a0 = random_tensor({3, 2}, rng);
  const Tensor b0 = random_tensor({3, 1}, rng);
  const Tensor w = random_tensor({3, 3}, rng);
  Tape tape;
  auto a = tape.variable(a0);
  auto b = tape.variable(b0);
  const Var parts[] = {a, b};
  tape.backward(sum(mul(concat_last(parts), tape.constant(w))));
  EXPECT_EQ(a.grad().at(2, 1), w.at(2, 1));
  EXPECT_EQ(b.grad().at(1, 0), w.at(1, 2));
}

TEST(Backward, IdentityAndSquare) {
  Tape tape;
  auto x = tape.variable(Tensor::scalar(3.0));
  tape.backward(x);
  EXPECT_EQ(x.grad()[0], 1.0);

  Tape tape2;
  auto v = tape2.variable(Tensor::vector({1, -2, 3}));
  tape2.backward(sum(mul(v, v)));
  EXPECT_EQ(v.grad()[0], 2.0);
  EXPECT_EQ(v.grad()[1], -4.0);
  EXPECT_EQ(v.grad()[2], 6.0);
}

TEST(Backward, NonScalarLossRejected) {
  Tape tape;
  auto v = tape.variable(Tensor::vector({1, 2}));
  EXPECT_THROW(tape.backward(v), ContractError);
}

TEST(Backward, OnlyReachableNodesGetGrads) {
  Tape tape;
  auto x = tape.variable(Tensor::vector({1, 2}));
  auto y = tape.variable(Tensor::vector({3, 4}));
  auto unused = mul(y, y);
  auto loss = sum(x);
  tape.backward(loss);
  EXPECT_TRUE(x.has_grad());
  EXPECT_FALSE(y.has_grad());
  EXPECT_FALSE(unused.has_grad());
  EXPECT_EQ(tape.ordering_violations(), 0u);
}

TEST(Backward, ParamGradsAccumulateAcrossTapes) {
  Param p("p", Tensor::vector({1, 2}));
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    tape.backward(sum(tape.param(p)));
  }
  EXPECT_EQ(p.grad[0], 2.0);
  EXPECT_EQ(p.grad[1], 2.0);
}

TEST(Backward, DeferredFlushScales) {
  Param p("p", Tensor::vector({1, 2}));
  Tape tape;
  tape.backward(sum(tape.param(p)), /*flush_params=*/false);
  EXPECT_EQ(p.grad[0], 0.0);
  tape.flush_param_grads(0.25);
  EXPECT_EQ(p.grad[0], 0.25);
}

TEST(Gradcheck, SumIsExact) {
  Param theta("theta", Tensor::vector({0.3, -1.2, 4.0}));
  Param* params[] = {&theta};
  auto report = finite_diff_gradcheck([&](Tape& t) { return sum(t.param(theta)); }, params);
  EXPECT_TRUE(report.passed);
  EXPECT_LT(report.max_rel_error, 1e-10);
  EXPECT_EQ(report.checked, 3u);
}

TEST(Gradcheck, SigmoidAtZero) {
  Param theta("theta", Tensor::scalar(0.0));
  Param* params[] = {&theta};
  auto report = finite_diff_gradcheck([&](Tape& t) { return sigmoid(t.param(theta)); }, params);
  EXPECT_TRUE(report.passed);
  EXPECT_DOUBLE_EQ(theta.grad[0], 0.25);
}

TEST(Gradcheck, DetectsNonDeterminism) {
  Param theta("theta", Tensor::scalar(1.0));
  Param* params[] = {&theta};
  int calls = 0;
  auto noisy = [&](Tape& t) { return add_scalar(t.param(theta), static_cast<double>(++calls)); };
  EXPECT_THROW(finite_diff_gradcheck(noisy, params), ContractError);
}

TEST(Gradcheck, ReportsWrongGradient) {
  // A loss whose backward is deliberately broken: forward uses x*x but the
  // custom node claims d/dx = 1.
  Param theta("theta", Tensor::vector({2.0, 3.0}));
  Param* params[] = {&theta};
  auto broken = [&](Tape& t) {
    Var x = t.param(theta);
    Tensor sq = x.value();
    for (auto& v : sq.data()) v *= v;
    Var y = t.push(std::move(sq), {x}, [](Tape& tp, std::size_t self) {
      tp.grad_for_accumulate(tp.input(self, 0)).axpy(1.0, tp.grad(self));
    });
    return sum(y);
  };
  auto report = finite_diff_gradcheck(broken, params);
  EXPECT_FALSE(report.passed);
  EXPECT_EQ(report.failures.size(), 2u);
  EXPECT_EQ(report.failures[0].param, "theta");
}

TEST(Gradcheck, RelativeErrorDefinition) {
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1.0, 2.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(1e-9, 0.0), 1e-9 / 1e-8);
}

TEST(Determinism, SameInputsBitIdentical) {
  auto run = [] {
    std::mt19937_64 rng(99);
    Tape tape;
    auto a = tape.variable(random_tensor({4, 3}, rng));
    auto b = tape.variable(random_tensor({3, 5}, rng));
    auto loss = sum(cru::tanh(matmul(a, b)));
    tape.backward(loss);
    return std::pair{loss.value().item(), a.grad()};
  };
  auto [l1, g1] = run();
  auto [l2, g2] = run();
  EXPECT_EQ(l1, l2);
  EXPECT_EQ(Tensor::max_abs_diff(g1, g2), 0.0);
}

TEST(Bce, ValuesAndGradientThroughSigmoid) {
  Tape tape;
  auto half = tape.constant(Tensor::vector({0.5, 0.5}));
  EXPECT_NEAR(bce(half, Tensor::vector({1, 0})).value().item(), std::log(2.0), 1e-15);

  auto exact = tape.constant(Tensor::vector({1.0, 0.0}));
  EXPECT_LT(bce(exact, Tensor::vector({1, 0})).value().item(), 2e-7);

  // dL/dlogit = p - y for a single sample.
  const double logit = 0.7;
  Tape t2;
  auto z = t2.variable(Tensor::vector({logit}));
  auto p = sigmoid(z);
  t2.backward(bce(p, Tensor::vector({1.0})));
  const double p0 = p.value()[0];
  EXPECT_NEAR(z.grad()[0], p0 - 1.0, 1e-12);
  auto numeric = numeric_grad(
      [&](const Tensor& x) {
        Tape t;
        return bce(sigmoid(t.constant(x)), Tensor::vector({1.0})).value().item();
      },
      Tensor::vector({logit}));
  EXPECT_NEAR(z.grad()[0], numeric[0], 1e-8);
}

TEST(Tape, TopologicalOrderInstrumented) {
  std::mt19937_64 rng(5);
  Tape tape;
  auto x = tape.variable(random_tensor({3, 3}, rng));
  Var h = x;
  for (int i = 0; i < 5; ++i) h = add(cru::tanh(matmul(h, x)), h);
  tape.backward(sum(h));
  EXPECT_EQ(tape.ordering_violations(), 0u);
}
