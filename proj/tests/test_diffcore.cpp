#include <gtest/gtest.h>

#include <random>

#include "pasa/graph.hpp"
#include "support/oracles.hpp"

using namespace pasa;
using pasa::testing::fd_input_gradient;
using pasa::testing::fd_param_gradient;
using pasa::testing::max_abs_diff;

namespace {

Graph single_affine() {
  Graph g(Shape{2});
  g.add_parameter("w", Tensor::matrix(1, 2, {1, 2}));
  g.add_parameter("b", Tensor::vector({0}));
  g.affine(g.input(), "w", "b");
  return g;
}

double target_objective(const Tensor& z, std::size_t t) {
  double s = 0.0;
  for (std::size_t r = 0; r < z.dim(0); ++r) s += z.row(r)[t];
  return s;
}

}  // namespace

TEST(Forward, IdentityGraphReturnsInput) {
  Graph g(Shape{3});
  auto z = forward(g, Tensor::vector({1, 2, 3}));
  EXPECT_EQ(z, Tensor::vector({1, 2, 3}));
}

TEST(Forward, SingleAffineIsDotProduct) {
  auto z = forward(single_affine(), Tensor::vector({1, 1}));
  ASSERT_EQ(z.shape(), Shape{1});
  EXPECT_EQ(z[0], 3.0);
}

TEST(Forward, ShapeMismatchThrows) {
  EXPECT_THROW(forward(single_affine(), Tensor::vector({1, 1, 1})), ShapeError);
}

TEST(Forward, NonFiniteIntermediateThrows) {
  Graph g(Shape{1});
  g.add_parameter("w", Tensor::matrix(1, 1, {1e308}));
  g.affine(g.affine(g.input(), "w"), "w");
  EXPECT_THROW(forward(g, Tensor::vector({10})), NumericError);
}

TEST(Forward, BatchedMatchesPerSample) {
  std::mt19937_64 rng(3);
  Graph g = pasa::testing::random_cnn(rng, 1, 0);
  Tensor batch = pasa::testing::random_tensor({3, 2, 7, 7}, rng);
  Tensor z = forward(g, batch);
  for (std::size_t s = 0; s < 3; ++s) {
    Tensor zs = forward(g, slice_row(batch, s));
    for (std::size_t j = 0; j < zs.size(); ++j) EXPECT_EQ(zs[j], z.row(s)[j]);
  }
}

TEST(Forward, DeterministicBitIdentical) {
  std::mt19937_64 rng(4);
  Graph g = pasa::testing::random_cnn(rng, 2, 1);
  Tensor x = pasa::testing::random_tensor({2, 7, 7}, rng);
  EXPECT_EQ(forward(g, x), forward(g, x));
}

TEST(InputGradient, AffineGradientIsWeightRow) {
  auto grad = input_gradient(single_affine(), Tensor::vector({0.3, -4}), 0);
  EXPECT_EQ(grad, Tensor::vector({1, 2}));
}

TEST(InputGradient, ReluSubgradientIsZeroOnNegativeSide) {
  Graph g(Shape{2});
  g.sum(g.relu(g.input()));
  auto grad = input_gradient(g, Tensor::vector({-1, 2}), 0);
  EXPECT_EQ(grad, Tensor::vector({0, 1}));
}

TEST(InputGradient, TargetOutOfRangeThrows) {
  EXPECT_THROW(input_gradient(single_affine(), Tensor::vector({1, 1}), 1), ArgumentError);
}

TEST(InputGradient, MatchesFiniteDifferencesOnRandomMlp) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    Graph g = pasa::testing::random_mlp(rng, 6, 8, 3);
    Tensor x = pasa::testing::random_tensor({6}, rng);
    for (std::size_t t = 0; t < 3; ++t) {
      auto analytic = input_gradient(g, x, t);
      auto numeric = fd_input_gradient(g, x, [t](const Tensor& z) { return target_objective(z, t); });
      EXPECT_LE(max_abs_diff(analytic.data(), numeric.data()), 1e-4);
    }
  }
}

TEST(InputGradient, MatchesFiniteDifferencesOnRandomCnn) {
  std::mt19937_64 rng(12);
  for (auto [stride, pad] : {std::pair{1u, 0u}, {1u, 1u}, {2u, 1u}}) {
    Graph g = pasa::testing::random_cnn(rng, stride, pad);
    Tensor x = pasa::testing::random_tensor({2, 7, 7}, rng);
    auto analytic = input_gradient(g, x, 2);
    auto numeric = fd_input_gradient(g, x, [](const Tensor& z) { return target_objective(z, 2); });
    EXPECT_LE(max_abs_diff(analytic.data(), numeric.data()), 1e-4);
  }
}

TEST(Softmax, Examples) {
  EXPECT_EQ(softmax(Tensor::vector({0, 0})), Tensor::vector({0.5, 0.5}));
  auto big = softmax(Tensor::vector({1000, 0}));
  EXPECT_NEAR(big[0], 1.0, 1e-12);
  EXPECT_NEAR(big[1], 0.0, 1e-12);
  auto p = softmax(Tensor::vector({1, 2, 3}));
  EXPECT_NEAR(p[0], 0.09003057, 1e-8);
  EXPECT_NEAR(p[1], 0.24472847, 1e-8);
  EXPECT_NEAR(p[2], 0.66524096, 1e-8);
}

TEST(Softmax, EmptyInputThrows) {
  EXPECT_THROW(softmax(Tensor()), ArgumentError);
}

TEST(Softmax, SumsToOneAndShiftInvariant) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> shift(-50, 50);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor z = pasa::testing::random_tensor({1 + static_cast<std::size_t>(trial % 9)}, rng, -20, 20);
    Tensor p = softmax(z);
    double total = 0.0;
    for (double v : p.data()) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    Tensor shifted = z;
    const double c = shift(rng);
    for (auto& v : shifted.data()) v += c;
    EXPECT_LE(max_abs_diff(softmax(shifted).data(), p.data()), 1e-12);
  }
}

TEST(LossGradients, SingleClassIsDegenerate) {
  Graph g(Shape{3});
  std::mt19937_64 rng(1);
  g.add_parameter("w", pasa::testing::random_tensor({1, 3}, rng));
  g.add_parameter("b", Tensor::vector({0.5}));
  g.affine(g.input(), "w", "b");
  std::vector<std::size_t> labels{0, 0};
  auto lg = loss_gradients(g, pasa::testing::random_tensor({2, 3}, rng), labels);
  EXPECT_EQ(lg.loss, 0.0);
  for (const auto& [name, t] : lg.params) {
    for (double v : t.data()) EXPECT_EQ(v, 0.0) << name;
  }
}

TEST(LossGradients, TwoClassAffineMatchesHandArithmetic) {
  Graph g(Shape{2});
  g.add_parameter("w", Tensor::matrix(2, 2, {1, -1, 0.5, 2}));
  g.add_parameter("b", Tensor::vector({0.1, -0.2}));
  g.affine(g.input(), "w", "b");
  // z0 = 1*0.5 - 1*1 + 0.1 = -0.4 ; z1 = 0.5*0.5 + 2*1 - 0.2 = 2.05
  std::vector<std::size_t> labels{0};
  auto lg = loss_gradients(g, Tensor::matrix(1, 2, {0.5, 1.0}), labels);
  const double z0 = -0.4, z1 = 2.05;
  const double expected = std::log(std::exp(z0) + std::exp(z1)) - z0;
  EXPECT_NEAR(lg.loss, expected, 1e-12);
  const double p0 = std::exp(z0) / (std::exp(z0) + std::exp(z1));
  EXPECT_NEAR(lg.params.at("b")[0], p0 - 1.0, 1e-12);
  EXPECT_NEAR(lg.params.at("b")[1], 1.0 - p0, 1e-12);
  EXPECT_NEAR(lg.params.at("w")[0], (p0 - 1.0) * 0.5, 1e-12);
}

TEST(LossGradients, LabelOutOfRangeThrows) {
  std::vector<std::size_t> labels{1};
  EXPECT_THROW(loss_gradients(single_affine(), Tensor::matrix(1, 2, {1, 1}), labels), ArgumentError);
}

TEST(LossGradients, LabelCountMismatchThrows) {
  std::vector<std::size_t> labels{0, 0};
  EXPECT_THROW(loss_gradients(single_affine(), Tensor::matrix(1, 2, {1, 1}), labels), ShapeError);
}

TEST(LossGradients, ParameterGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(21);
  Graph g = pasa::testing::random_cnn(rng, 1, 1);
  Tensor x = pasa::testing::random_tensor({3, 2, 7, 7}, rng);
  std::vector<std::size_t> labels{0, 3, 1};
  auto lg = loss_gradients(g, x, labels);
  auto objective = [&](const Tensor& z) { return pasa::testing::cross_entropy(z, labels); };
  for (const auto& [name, t] : g.parameters()) {
    auto numeric = fd_param_gradient(g, name, x, objective);
    EXPECT_LE(max_abs_diff(lg.params.at(name).data(), numeric.data()), 1e-4) << name;
  }
  auto numeric_x = fd_input_gradient(g, x, objective);
  EXPECT_LE(max_abs_diff(lg.input.data(), numeric_x.data()), 1e-4);
}
