/*
 * Copyright 2026 The Empathy-LSTM Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "empathy/errors.hpp"
#include "empathy/ops.hpp"
#include "empathy/optim.hpp"
#include "empathy/tensor.hpp"
#include "test_support.hpp"

namespace {

using empathy::ContractError;
using empathy::DimensionError;
using empathy::NamedParameter;
using empathy::Shape;
using empathy::Tape;
using empathy::Tensor;
namespace ops = empathy::ops;
using empathy::testing::gradient_check;
using empathy::testing::random_vector;

Tensor param(Shape shape, std::mt19937_64& rng) {
  const auto n = empathy::element_count(shape);
  Tensor t(std::move(shape), random_vector(n, rng));
  t.set_requires_grad(true);
  return t;
}

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

TEST(TensorTest, ShapeAndValueInvariants) {
  Tensor t(Shape{2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_FALSE(t.has_grad());
  EXPECT_THROW(Tensor(Shape{2, 0}), DimensionError);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST(TensorTest, CloneIsDeep) {
  Tensor a = Tensor::vector({1, 2});
  Tensor b = a.clone();
  b.mutable_values()[0] = 9;
  EXPECT_EQ(a.at(0), 1.0);
}

TEST(MatmulTest, IdentityLeavesMatrixUnchanged) {
  Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  Tensor a = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(to_vec(ops::matmul(eye, a).values()), to_vec(a.values()));
}

TEST(MatmulTest, HandCheckedProduct) {
  Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  Tensor b = Tensor::matrix(2, 1, {1, 1});
  Tensor c = ops::matmul(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_EQ(to_vec(c.values()), (std::vector<double>{3, 7}));
}

TEST(MatmulTest, MismatchNamesBothShapes) {
  Tensor a(Shape{2, 3});
  Tensor b(Shape{2, 3});
  try {
    ops::matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    // Both operands are [2x3], so the shape must appear twice.
    ASSERT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2x3]"), msg.rfind("[2x3]")) << msg;
  }
}

TEST(MatmulTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::vector<NamedParameter> params{{"a", param({5, 4}, rng)}, {"b", param({4, 3}, rng)}};
  Tensor weights(Shape{5, 3}, random_vector(15, rng));
  auto loss = [&] {
    return ops::sum(ops::mul(ops::matmul(params[0].tensor, params[1].tensor), weights));
  };
  EXPECT_LT(gradient_check(loss, params).max_relative_error, 1e-6);
}

TEST(ElementwiseTest, SigmoidAtZero) {
  EXPECT_DOUBLE_EQ(ops::sigmoid(Tensor::scalar(0.0)).item(), 0.5);
}

TEST(ElementwiseTest, TanhValueAndSlopeAtZero) {
  Tensor x = Tensor::scalar(0.0).set_requires_grad(true);
  Tape tape;
  Tensor y = ops::tanh(x);
  EXPECT_EQ(y.item(), 0.0);
  tape.backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
}

TEST(ElementwiseTest, ReluGradientIsMask) {
  Tensor x = Tensor::vector({-2.0, 3.0, -0.5, 0.25}).set_requires_grad(true);
  Tape tape;
  tape.backward(ops::sum(ops::relu(x)));
  EXPECT_EQ(to_vec(x.grad()), (std::vector<double>{0, 1, 0, 1}));
}

TEST(ElementwiseTest, ScalarBroadcastAndMismatch) {
  Tensor v = Tensor::vector({1, 2, 3});
  EXPECT_EQ(to_vec(ops::add(v, Tensor::scalar(1)).values()), (std::vector<double>{2, 3, 4}));
  EXPECT_EQ(to_vec(ops::mul(Tensor::scalar(2), v).values()), (std::vector<double>{2, 4, 6}));
  EXPECT_THROW(ops::add(v, Tensor::vector({1, 2})), DimensionError);
  EXPECT_THROW(ops::mul(v, Tensor(Shape{3, 1})), DimensionError);
}

TEST(ElementwiseTest, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::vector<NamedParameter> params{{"a", param({3, 4}, rng)},
                                     {"b", param({3, 4}, rng)},
                                     {"s", param({1}, rng)}};
  auto loss = [&] {
    const Tensor &a = params[0].tensor, &b = params[1].tensor, &s = params[2].tensor;
    Tensor x = ops::add(ops::mul(ops::tanh(a), ops::sigmoid(b)), ops::sub(a, ops::scale(b, 0.3)));
    x = ops::mul(x, s);
    return ops::sum(ops::mul(ops::relu(x), x));
  };
  EXPECT_LT(gradient_check(loss, params).max_relative_error, 1e-6);
}

TEST(ConcatTest, ThreeEmbeddingsFuseTo384) {
  std::vector<Tensor> parts(3, Tensor(Shape{128}, 0.5));
  EXPECT_EQ(ops::concat(parts, 0).shape(), (Shape{384}));
}

TEST(ConcatTest, SingleTensorIsUnchanged) {
  Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  Tensor c = ops::concat(std::span(&a, 1), 1);
  EXPECT_EQ(c.shape(), a.shape());
  EXPECT_EQ(to_vec(c.values()), to_vec(a.values()));
}

TEST(ConcatTest, RejectsEmptyAndMismatchedLists) {
  std::vector<Tensor> none;
  EXPECT_THROW(ops::concat(none, 0), DimensionError);
  std::vector<Tensor> bad{Tensor(Shape{2, 3}), Tensor(Shape{3, 3})};
  EXPECT_THROW(ops::concat(bad, 1), DimensionError);
  EXPECT_NO_THROW(ops::concat(bad, 0));
}

TEST(ConcatTest, GradientSplitsAcrossParts) {
  std::mt19937_64 rng(5);
  std::vector<NamedParameter> params{
      {"a", param({2, 3}, rng)}, {"b", param({2, 1}, rng)}, {"c", param({2, 2}, rng)}};
  Tensor weights(Shape{2, 6}, random_vector(12, rng));
  auto loss = [&] {
    std::vector<Tensor> parts{params[0].tensor, params[1].tensor, params[2].tensor};
    return ops::sum(ops::mul(ops::tanh(ops::concat(parts, 1)), weights));
  };
  EXPECT_LT(gradient_check(loss, params).max_relative_error, 1e-6);
}

TEST(SoftmaxTest, UniformInput) {
  Tensor p = ops::softmax(Tensor::vector({0, 0, 0}));
  for (double v : p.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(SoftmaxTest, LargeInputDoesNotOverflow) {
  Tensor p = ops::softmax(Tensor::vector({1000, 0}));
  EXPECT_TRUE(std::isfinite(p.at(0)));
  EXPECT_NEAR(p.at(0), 1.0, 1e-12);
  EXPECT_NEAR(p.at(1), 0.0, 1e-12);
}

TEST(SoftmaxTest, SimplexAndShiftInvariance) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    auto x = random_vector(1 + trial % 7, rng, -20, 20);
    Tensor p = ops::softmax(Tensor::vector(x));
    double total = 0;
    for (double v : p.values()) {
      EXPECT_GT(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    auto shifted = x;
    for (auto& v : shifted) v += 37.5;
    Tensor q = ops::softmax(Tensor::vector(shifted));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(p.at(i), q.at(i), 1e-12);
  }
}

TEST(SoftmaxTest, RowsOfAMatrixAreIndependent) {
  Tensor p = ops::softmax(Tensor::matrix(2, 2, {0, 0, 1000, 0}));
  EXPECT_NEAR(p.at(0), 0.5, 1e-15);
  EXPECT_NEAR(p.at(2), 1.0, 1e-12);
}

TEST(SoftmaxTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  std::vector<NamedParameter> params{{"x", param({3}, rng)}};
  Tensor weights = Tensor::vector({0.3, -1.2, 2.0});
  auto loss = [&] { return ops::sum(ops::mul(ops::softmax(params[0].tensor), weights)); };
  EXPECT_LT(gradient_check(loss, params).max_relative_error, 1e-6);
}

TEST(MseTest, IdenticalVectorsGiveZero) {
  Tensor a = Tensor::vector({0.1, -0.4, 0.9});
  EXPECT_EQ(ops::mse_loss(a, a.clone()).item(), 0.0);
}

TEST(MseTest, HandComputedValue) {
  EXPECT_DOUBLE_EQ(ops::mse_loss(Tensor::vector({1, 0}), Tensor::vector({0, 0})).item(), 0.5);
}

TEST(MseTest, LengthMismatch) {
  EXPECT_THROW(ops::mse_loss(Tensor::vector({1, 0}), Tensor::vector({0, 0, 0})), DimensionError);
}

TEST(MseTest, GradientIsScaledResidual) {
  std::mt19937_64 rng(2);
  std::vector<NamedParameter> params{{"p", param({10}, rng)}};
  Tensor target = Tensor::vector(random_vector(10, rng));
  auto loss = [&] { return ops::mse_loss(params[0].tensor, target); };
  EXPECT_LT(gradient_check(loss, params).max_relative_error, 1e-6);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_NEAR(params[0].tensor.grad()[i],
                2.0 * (params[0].tensor.at(i) - target.at(i)) / 10.0, 1e-15);
  }
}

TEST(MseTest, MaskedLossIgnoresMaskedEntries) {
  Tensor pred = Tensor::vector({1, 5, 0}).set_requires_grad(true);
  Tensor target = Tensor::vector({0, 0, 0});
  Tensor mask = Tensor::vector({1, 0, 1});
  Tape tape;
  Tensor l = ops::mse_loss(pred, target, mask);
  EXPECT_DOUBLE_EQ(l.item(), 0.5);
  tape.backward(l);
  EXPECT_EQ(pred.grad()[1], 0.0);
  EXPECT_DOUBLE_EQ(pred.grad()[0], 1.0);
}

TEST(OpsTest, StructuralOpsGradients) {
  std::mt19937_64 rng(4);
  std::vector<NamedParameter> params{{"x", param({4, 3}, rng)},
                                     {"f", param({4}, rng)},
                                     {"w", param({3, 2}, rng)},
                                     {"b", param({2}, rng)}};
  Tensor weights(Shape{2, 2}, random_vector(4, rng));
  auto loss = [&] {
    Tensor y = ops::scale_rows(params[0].tensor, params[1].tensor);
    y = ops::affine(y, params[2].tensor, params[3].tensor);  // 4x2
    y = ops::slice(ops::reshape(y, {2, 4}), 1, 1, 3);         // 2x2
    return ops::sum(ops::mul(ops::tanh(y), weights));
  };
  EXPECT_LT(gradient_check(loss, params).max_relative_error, 1e-6);
}

TEST(OpsTest, ConcordanceLossGradient) {
  std::mt19937_64 rng(6);
  std::vector<NamedParameter> params{{"p", param({12, 2}, rng)}};
  Tensor target(Shape{12, 2}, random_vector(24, rng));
  std::vector<double> m(24, 1.0);
  m[22] = m[23] = 0.0;
  Tensor mask(Shape{12, 2}, m);
  auto loss = [&] { return ops::concordance_loss(params[0].tensor, target, mask); };
  EXPECT_LT(gradient_check(loss, params).max_relative_error, 1e-6);
  Tensor same(Shape{3, 1}, std::vector<double>{0.1, 0.5, -0.2});
  EXPECT_NEAR(ops::concordance_loss(same, same, Tensor(Shape{3, 1}, 1.0)).item(), 0.0, 1e-12);
}

TEST(BackwardTest, SumGivesOnes) {
  Tensor w(Shape{2, 3}, 0.7);
  w.set_requires_grad(true);
  Tape tape;
  Tensor loss = ops::sum(w);
  tape.backward(loss);
  for (double g : w.grad()) EXPECT_EQ(g, 1.0);
  EXPECT_EQ(loss.grad()[0], 1.0);
}

TEST(BackwardTest, ChainRuleByHand) {
  const std::vector<double> wv{0.4, -0.3}, xv{1.5, 2.0};
  Tensor w = Tensor::matrix(1, 2, wv).set_requires_grad(true);
  Tensor x = Tensor::matrix(2, 1, xv);
  Tape tape;
  tape.backward(ops::sum(ops::tanh(ops::matmul(w, x))));
  const double z = wv[0] * xv[0] + wv[1] * xv[1];
  const double slope = 1.0 - std::tanh(z) * std::tanh(z);
  EXPECT_NEAR(w.grad()[0], slope * xv[0], 1e-15);
  EXPECT_NEAR(w.grad()[1], slope * xv[1], 1e-15);
}

TEST(BackwardTest, RejectsNonScalarLoss) {
  Tensor w(Shape{3}, 1.0);
  w.set_requires_grad(true);
  Tape tape;
  Tensor y = ops::tanh(w);
  EXPECT_THROW(tape.backward(y), ContractError);
}

TEST(BackwardTest, WithoutTapeNothingIsRecorded) {
  Tensor w(Shape{3}, 1.0);
  w.set_requires_grad(true);
  Tensor loss = ops::sum(w);
  EXPECT_THROW(empathy::backward(loss), ContractError);
  Tape tape;
  EXPECT_THROW(tape.backward(loss), ContractError);
}

TEST(BackwardTest, TwoPassesAccumulateExactly) {
  std::mt19937_64 rng(9);
  Tensor w = param({6, 5}, rng);
  Tensor x(Shape{4, 6}, random_vector(24, rng));
  auto run = [&] {
    Tape tape;
    tape.backward(ops::sum(ops::tanh(ops::matmul(x, w))));
  };
  run();
  const auto once = to_vec(w.grad());
  run();
  const auto twice = to_vec(w.grad());
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(twice[i], once[i] + once[i]);
  w.zero_grad();
  for (double g : w.grad()) EXPECT_EQ(g, 0.0);
}

TEST(BackwardTest, ParameterReusedAcrossStepsAccumulatesAllPaths) {
  // A recurrence reusing one matrix, checked against central differences.
  std::mt19937_64 rng(10);
  std::vector<NamedParameter> params{{"w", param({3, 3}, rng)}, {"h0", param({1, 3}, rng)}};
  auto loss = [&] {
    Tensor h = params[1].tensor;
    for (int t = 0; t < 6; ++t) h = ops::tanh(ops::matmul(h, params[0].tensor));
    return ops::sum(h);
  };
  EXPECT_LT(gradient_check(loss, params).max_relative_error, 1e-6);
}

TEST(OptimizerTest, PlainSgdStep) {
  std::vector<NamedParameter> params{{"w", Tensor::scalar(1.0).set_requires_grad(true)}};
  params[0].tensor.mutable_grad()[0] = 1.0;
  empathy::Optimizer opt({.kind = empathy::OptimizerKind::sgd, .learning_rate = 0.1});
  opt.step(params);
  EXPECT_DOUBLE_EQ(params[0].tensor.item(), 0.9);
  EXPECT_EQ(opt.step_count(), 1u);
  EXPECT_EQ(params[0].tensor.grad()[0], 1.0);  // grads untouched
}

TEST(OptimizerTest, ZeroGradientLeavesParametersUnchanged) {
  for (auto kind : {empathy::OptimizerKind::sgd, empathy::OptimizerKind::adam}) {
    Tensor w = Tensor::vector({0.5, -2.0}).set_requires_grad(true);
    w.zero_grad();
    std::vector<NamedParameter> params{{"w", w}};
    empathy::Optimizer opt({.kind = kind});
    opt.step(params);
    EXPECT_EQ(w.at(0), 0.5);
    EXPECT_EQ(w.at(1), -2.0);
  }
}

TEST(OptimizerTest, TwoAdamStepsMatchHandEvaluation) {
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 0.5;
  Tensor w = Tensor::scalar(1.0).set_requires_grad(true);
  w.mutable_grad()[0] = g;
  std::vector<NamedParameter> params{{"w", w}};
  empathy::Optimizer opt({.kind = empathy::OptimizerKind::adam, .learning_rate = lr});
  opt.step(params);
  opt.step(params);
  // m_t = b1 m + (1-b1) g, v_t = b2 v + (1-b2) g^2, w -= lr mhat / (sqrt(vhat) + eps)
  double expected = 1.0, m = 0, v = 0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    expected -= lr * mhat / (std::sqrt(vhat) + eps);
  }
  EXPECT_NEAR(w.item(), expected, 1e-15);
  EXPECT_NEAR(w.item(), 1.0 - 2 * lr, 1e-9);
  ASSERT_EQ(opt.first_moments().size(), 1u);
  EXPECT_EQ(opt.first_moments()[0].size(), w.size());
  EXPECT_EQ(opt.second_moments()[0].size(), w.size());
}

TEST(OptimizerTest, MissingGradientNamesParameter) {
  std::vector<NamedParameter> params{{"lstm.bias", Tensor(Shape{4}).set_requires_grad(true)}};
  empathy::Optimizer opt({});
  try {
    opt.step(params);
    FAIL() << "expected ContractError";
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("lstm.bias"), std::string::npos);
  }
}

TEST(OptimizerTest, ParseNames) {
  EXPECT_EQ(empathy::parse_optimizer("sgd"), empathy::OptimizerKind::sgd);
  EXPECT_EQ(empathy::parse_optimizer("adam"), empathy::OptimizerKind::adam);
  EXPECT_THROW(empathy::parse_optimizer("rmsprop"), empathy::ConfigError);
}

TEST(OptimizerTest, ClipGradNormRescalesJointNorm) {
  Tensor a = Tensor::vector({3, 0}).set_requires_grad(true);
  Tensor b = Tensor::vector({4}).set_requires_grad(true);
  a.mutable_grad()[0] = 3;
  b.mutable_grad()[0] = 4;
  std::vector<NamedParameter> params{{"a", a}, {"b", b}};
  EXPECT_DOUBLE_EQ(empathy::clip_grad_norm(params, 1.0), 5.0);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-15);
  EXPECT_NEAR(b.grad()[0], 0.8, 1e-15);
  EXPECT_NEAR(empathy::clip_grad_norm(params, 10.0), 1.0, 1e-15);
  EXPECT_NEAR(b.grad()[0], 0.8, 1e-15);
}

TEST(OptimizerTest, IdenticalRunsAreBitwiseIdentical) {
  auto run = [] {
    std::mt19937_64 rng(123);
    std::vector<NamedParameter> params{{"w", param({4, 3}, rng)}};
    Tensor x(Shape{5, 4}, random_vector(20, rng));
    Tensor y(Shape{5, 3}, random_vector(15, rng));
    empathy::Optimizer opt({});
    for (int step = 0; step < 20; ++step) {
      empathy::zero_grad(params);
      Tape tape;
      tape.backward(ops::mse_loss(ops::tanh(ops::matmul(x, params[0].tensor)), y));
      opt.step(params);
    }
    return to_vec(params[0].tensor.values());
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
