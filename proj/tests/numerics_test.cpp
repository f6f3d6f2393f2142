#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "promim/tensor.hpp"
#include "test_support.hpp"

namespace promim {
namespace {

using testing::error_kind;
using testing::gradient_error;
using testing::random_projection;
using testing::random_tensor;

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Rng rng(1);
  const Tensor a = random_tensor({3, 3}, rng);
  const Tensor eye = Tensor::from_data({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  EXPECT_EQ(matmul(eye, a).to_vector(), a.to_vector());
}

TEST(Matmul, HandArithmetic) {
  const Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  const Tensor b = Tensor::from_data({2, 1}, {0, 1});
  const Tensor c = matmul(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_EQ(c.to_vector(), (std::vector<double>{2, 4}));
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  Rng rng(2);
  Tensor a = random_tensor({4, 5}, rng);
  Tensor b = random_tensor({5, 3}, rng);
  const std::uint64_t s = rng.next_u64();
  const double err =
      gradient_error([&] { Rng r(s); return random_projection(matmul(a, b), r); }, {a, b});
  EXPECT_LT(err, 1e-6);
}

TEST(Matmul, InnerDimensionMismatchIsDimensionError) {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({2, 3});
  EXPECT_EQ(error_kind([&] { matmul(a, b); }), ErrorKind::kDimension);
}

TEST(Softmax, SymmetricLogitsGiveUniform) {
  const Tensor p = softmax(Tensor::vector({0, 0, 0}), 0);
  for (double v : p.to_vector()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, ShiftInvariance) {
  for (double c : {-300.0, -1.5, 0.0, 7.25, 500.0}) {
    const Tensor p = softmax(Tensor::vector({c, c + std::log(2.0)}), 0);
    EXPECT_NEAR(p[0], 1.0 / 3.0, 1e-12) << c;
    EXPECT_NEAR(p[1], 2.0 / 3.0, 1e-12) << c;
  }
}

TEST(Softmax, MatchesScalarFormula) {
  const Tensor p = softmax(Tensor::vector({0.5, 0.1}), 0);
  const double z = std::exp(0.5) + std::exp(0.1);
  EXPECT_NEAR(p[0], std::exp(0.5) / z, 1e-15);
  EXPECT_NEAR(p[1], std::exp(0.1) / z, 1e-15);
}

TEST(Softmax, RowsSumToOneForRandomLogits) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = random_tensor({4, 6}, rng, -50.0, 50.0, false);
    for (std::size_t axis : {0u, 1u}) {
      const Tensor p = softmax(x, axis);
      const std::size_t rows = axis == 1 ? 4 : 6;
      for (std::size_t r = 0; r < rows; ++r) {
        double total = 0.0;
        for (std::size_t k = 0; k < (axis == 1 ? 6u : 4u); ++k) {
          total += axis == 1 ? p.at(r, k) : p.at(k, r);
        }
        EXPECT_NEAR(total, 1.0, 1e-9);
      }
      for (double v : p.to_vector()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
  }
}

TEST(Softmax, EmptyAxisIsDimensionError) {
  EXPECT_EQ(error_kind([] { softmax(Tensor::vector({}), 0); }), ErrorKind::kDimension);
}

TEST(CosineSimilarity, SelfSimilarityIsOne) {
  Rng rng(4);
  for (int i = 0; i < 10; ++i) {
    const Tensor v = random_tensor({7}, rng, -3.0, 3.0, false);
    EXPECT_NEAR(cosine_similarity(v, v).item(), 1.0, 1e-12);
  }
}

TEST(CosineSimilarity, OrthogonalIsZero) {
  EXPECT_DOUBLE_EQ(cosine_similarity(Tensor::vector({1, 0}), Tensor::vector({0, 1})).item(), 0.0);
}

TEST(CosineSimilarity, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  Tensor a = random_tensor({6}, rng);
  Tensor b = random_tensor({6}, rng);
  EXPECT_LT(gradient_error([&] { return cosine_similarity(a, b); }, {a, b}), 1e-6);
}

TEST(CosineSimilarity, ZeroNormIsDegenerateInput) {
  EXPECT_EQ(error_kind([] { cosine_similarity(Tensor::vector({0, 0}), Tensor::vector({1, 0})); }),
            ErrorKind::kDegenerateInput);
}

TEST(LayerNorm, ConstantRowMapsToZero) {
  const Tensor y = layer_norm(Tensor::from_data({1, 4}, {5, 5, 5, 5}), Tensor::vector({1, 1, 1, 1}),
                              Tensor::vector({0, 0, 0, 0}));
  for (double v : y.to_vector()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, TwoElementRowHasUnitVariance) {
  const Tensor y =
      layer_norm(Tensor::from_data({1, 2}, {1, -1}), Tensor::vector({1, 1}), Tensor::vector({0, 0}));
  // Variance is already 1, well above the epsilon floor.
  EXPECT_EQ(y[0], 1.0);
  EXPECT_EQ(y[1], -1.0);
}

TEST(LayerNorm, RowsAreStandardized) {
  Rng rng(6);
  const Tensor x = random_tensor({5, 8}, rng, -4.0, 4.0, false);
  const Tensor y = layer_norm(x, Tensor::vector(std::vector<double>(8, 1.0)),
                              Tensor::vector(std::vector<double>(8, 0.0)));
  for (std::size_t r = 0; r < 5; ++r) {
    double m = 0.0, v = 0.0;
    for (std::size_t c = 0; c < 8; ++c) m += y.at(r, c) / 8.0;
    for (std::size_t c = 0; c < 8; ++c) v += (y.at(r, c) - m) * (y.at(r, c) - m) / 8.0;
    EXPECT_NEAR(m, 0.0, 1e-7);
    EXPECT_NEAR(v, 1.0, 1e-7);
  }
}

TEST(LayerNorm, GradientOnRandomInput) {
  Rng rng(7);
  Tensor x = random_tensor({3, 4}, rng);
  Tensor g = random_tensor({4}, rng, 0.5, 1.5);
  Tensor b = random_tensor({4}, rng);
  const std::uint64_t s = rng.next_u64();
  const double err = gradient_error(
      [&] { Rng r(s); return random_projection(layer_norm(x, g, b), r); }, {x, g, b});
  EXPECT_LT(err, 1e-6);
}

TEST(Backward, SumGivesOnes) {
  Tensor p = Tensor::vector({0.3, -2.0, 5.0}, true);
  sum(p).backward();
  for (double g : p.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, DotWithSelfGivesTwiceInput) {
  Tensor p = Tensor::vector({0.3, -2.0, 5.0}, true);
  dot(p, p).backward();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(p.grad()[i], 2.0 * p[i]);
}

TEST(Backward, NonScalarLossIsContractError) {
  Tensor p = Tensor::vector({1, 2}, true);
  const Tensor y = scale(p, 2.0);
  EXPECT_EQ(error_kind([&] { y.backward(); }), ErrorKind::kContract);
}

TEST(Backward, UnreachableTensorsUntouched) {
  Tensor p = Tensor::vector({1, 2}, true);
  Tensor q = Tensor::vector({3, 4}, true);
  sum(p).backward();
  EXPECT_TRUE(p.has_grad());
  EXPECT_FALSE(q.has_grad());
}

TEST(Backward, RepeatedBackwardAccumulates) {
  Tensor p = Tensor::vector({1, -1}, true);
  const Tensor loss = dot(p, p);
  loss.backward();
  loss.backward();
  EXPECT_DOUBLE_EQ(p.grad()[0], 4.0);
  EXPECT_DOUBLE_EQ(p.grad()[1], -4.0);
  p.zero_grad();
  loss.backward();
  EXPECT_DOUBLE_EQ(p.grad()[0], 2.0);
}

TEST(Backward, SharedSubexpressionVisitedOnce) {
  Tensor p = Tensor::vector({0.5, 1.5}, true);
  const Tensor e = exp(p);
  sum(add(e, e)).backward();
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(p.grad()[i], 2.0 * std::exp(p[i]), 1e-12);
}

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_EQ(error_kind([] { Tensor::from_data({2, 2}, {1, 2, 3}); }), ErrorKind::kDimension);
}

TEST(Tensor, DomainAndOverflowErrors) {
  EXPECT_EQ(error_kind([] { log(Tensor::vector({-1.0})); }), ErrorKind::kDegenerateInput);
  EXPECT_EQ(error_kind([] { exp(Tensor::vector({1e6})); }), ErrorKind::kNumeric);
}

TEST(Tensor, NoGradGuardSkipsGraph) {
  Tensor p = Tensor::vector({1, 2}, true);
  Tensor y;
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_mode_enabled());
    y = sum(p);
  }
  EXPECT_TRUE(grad_mode_enabled());
  EXPECT_FALSE(y.requires_grad());
}

TEST(Tensor, IndependentGraphsOnSeparateThreads) {
  std::vector<double> results(4);
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < results.size(); ++t) {
    workers.emplace_back([&, t] {
      Tensor p = Tensor::vector({static_cast<double>(t), 1.0}, true);
      for (int i = 0; i < 200; ++i) {
        p.zero_grad();
        dot(p, p).backward();
      }
      results[t] = p.grad()[0];
    });
  }
  for (auto& w : workers) w.join();
  for (std::size_t t = 0; t < results.size(); ++t) EXPECT_EQ(results[t], 2.0 * t);
}

}  // namespace
}  // namespace promim
