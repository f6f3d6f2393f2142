#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "promim/objectives.hpp"
#include "test_support.hpp"

namespace promim {
namespace {

using testing::error_kind;
using testing::random_tensor;

constexpr double kLambdaGrid[] = {0.0, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0};

TEST(ClassProbabilities, IdenticalClassesGiveUniform) {
  const Tensor x = Tensor::vector({0.3, -0.2, 0.9});
  for (std::size_t c : {2u, 5u}) {
    std::vector<double> w;
    for (std::size_t i = 0; i < c; ++i) w.insert(w.end(), {1.0, 2.0, -1.0});
    const ClassProbabilities p = class_probabilities(x, Tensor::from_data({c, 3}, w), 0.07);
    for (double v : p.probs.to_vector()) EXPECT_NEAR(v, 1.0 / static_cast<double>(c), 1e-12);
  }
}

TEST(ClassProbabilities, SimilaritiesMatchScalarOracle) {
  const Tensor x = Tensor::vector({1.0, 0.0});
  const Tensor w = Tensor::from_data({2, 2}, {0.5, std::sqrt(0.75), 0.1, std::sqrt(0.99)});
  const ClassProbabilities p = class_probabilities(x, w, 1.0);
  EXPECT_NEAR(p.similarities[0], 0.5, 1e-12);
  EXPECT_NEAR(p.similarities[1], 0.1, 1e-12);
  const double z = std::exp(0.5) + std::exp(0.1);
  EXPECT_NEAR(p.probs[0], std::exp(0.5) / z, 1e-12);
  EXPECT_NEAR(p.probs[1], std::exp(0.1) / z, 1e-12);
  EXPECT_EQ(p.argmax(), 0u);
}

TEST(ClassProbabilities, SmallTemperatureConcentratesOnArgmax) {
  const Tensor x = Tensor::vector({1.0, 0.0});
  const Tensor w = Tensor::from_data({3, 2}, {0.1, 1.0, 0.9, 0.2, -1.0, 0.3});
  const ClassProbabilities p = class_probabilities(x, w, 1e-3);
  EXPECT_NEAR(p.probs[1], 1.0, 1e-9);
}

TEST(ClassProbabilities, ArgmaxIndependentOfTemperature) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = random_tensor({6}, rng, -1, 1, false);
    const Tensor w = random_tensor({5, 6}, rng, -1, 1, false);
    const std::size_t ref = class_probabilities(x, w, 1.0).argmax();
    for (double tau : {1e-3, 0.01, 0.07, 3.0, 100.0}) {
      const ClassProbabilities p = class_probabilities(x, w, tau);
      EXPECT_EQ(p.argmax(), ref);
      const auto probs = p.probs.to_vector();
      EXPECT_EQ(static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin()),
                ref);
      double total = 0.0;
      for (double v : probs) total += v;
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(ClassProbabilities, InvalidInputs) {
  const Tensor x = Tensor::vector({1.0, 0.0});
  const Tensor w = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  EXPECT_EQ(error_kind([&] { class_probabilities(x, w, 0.0); }), ErrorKind::kInput);
  EXPECT_EQ(error_kind([&] { class_probabilities(x, w, -1.0); }), ErrorKind::kInput);
  EXPECT_EQ(error_kind([&] { class_probabilities(Tensor::vector({0.0, 0.0}), w, 1.0); }),
            ErrorKind::kDegenerateInput);
  const Tensor one = Tensor::from_data({1, 2}, {1, 0});
  EXPECT_EQ(error_kind([&] { class_probabilities(x, one, 1.0); }), ErrorKind::kInput);
}

TEST(CrossEntropy, CertainLabelGivesZero) {
  const Tensor x = Tensor::vector({1.0, 0.0});
  const Tensor w = Tensor::from_data({2, 2}, {1, 0, -1, 0});
  // tau small enough that p_label rounds to exactly 1.
  EXPECT_NEAR(cross_entropy(class_probabilities(x, w, 1e-3), 0).item(), 0.0, 1e-12);
}

TEST(CrossEntropy, UniformGivesLogC) {
  const Tensor x = Tensor::vector({1.0, 1.0});
  const Tensor w = Tensor::from_data({4, 2}, {1, 2, 1, 2, 1, 2, 1, 2});
  const ClassProbabilities p = class_probabilities(x, w, 0.5);
  for (std::size_t label = 0; label < 4; ++label) {
    EXPECT_NEAR(cross_entropy(p, label).item(), std::log(4.0), 1e-12);
  }
}

TEST(CrossEntropy, InvalidLabelIsInputError) {
  const ClassProbabilities p =
      class_probabilities(Tensor::vector({1.0, 0.0}), Tensor::from_data({2, 2}, {1, 0, 0, 1}), 1.0);
  EXPECT_EQ(error_kind([&] { cross_entropy(p, 2); }), ErrorKind::kInput);
}

TEST(KgLoss, EqualEmbeddingsGiveZero) {
  Rng rng(2);
  const Tensor w = l2_normalize(random_tensor({5, 8}, rng, -1, 1, false));
  EXPECT_EQ(kg_loss(w, w).item(), 0.0);
}

TEST(KgLoss, OrthogonalUnitVectorsGiveTwo) {
  for (std::size_t classes : {1u, 3u, 8u}) {
    std::vector<double> e1, e2;
    for (std::size_t c = 0; c < classes; ++c) {
      e1.insert(e1.end(), {1, 0, 0});
      e2.insert(e2.end(), {0, 1, 0});
    }
    EXPECT_DOUBLE_EQ(
        kg_loss(Tensor::from_data({classes, 3}, e1), Tensor::from_data({classes, 3}, e2)).item(), 2.0);
  }
}

TEST(KgLoss, MatchesScalarSummation) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(6), d = 1 + rng.below(7);
    const Tensor a = random_tensor({n, d}, rng, -2, 2, false);
    const Tensor b = random_tensor({n, d}, rng, -2, 2, false);
    double expected = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double dist = 0.0;
      for (std::size_t k = 0; k < d; ++k) dist += (a.at(i, k) - b.at(i, k)) * (a.at(i, k) - b.at(i, k));
      expected += dist;
    }
    expected /= static_cast<double>(n);
    EXPECT_NEAR(kg_loss(a, b).item(), expected, 1e-12);
    EXPECT_GE(kg_loss(a, b).item(), 0.0);
  }
}

TEST(KgLoss, GradientReachesOnlyLearned) {
  Tensor learned = Tensor::from_data({1, 2}, {1, 0}, true);
  Tensor ref = Tensor::from_data({1, 2}, {0, 1}, true);
  kg_loss(learned, ref).backward();
  EXPECT_TRUE(learned.has_grad());
  EXPECT_FALSE(ref.has_grad());
  EXPECT_DOUBLE_EQ(learned.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(learned.grad()[1], -2.0);
}

TEST(KgLoss, ClassCountMismatchIsInputError) {
  EXPECT_EQ(error_kind([] { kg_loss(Tensor::zeros({2, 3}), Tensor::zeros({3, 3})); }),
            ErrorKind::kInput);
}

TEST(TotalLoss, LambdaZeroReturnsCrossEntropy) {
  const Tensor ce = Tensor::scalar(0.8372);
  const LossBreakdown b = total_loss(ce, Tensor::scalar(1.5), 0.0);
  EXPECT_EQ(b.total_value, 0.8372);
  EXPECT_EQ(b.ce, 0.8372);
}

TEST(TotalLoss, Arithmetic) {
  const LossBreakdown b = total_loss(Tensor::scalar(1.0), Tensor::scalar(0.5), 2.0);
  EXPECT_EQ(b.total_value, 2.0);
  EXPECT_EQ(b.kg, 0.5);
  EXPECT_EQ(b.lambda, 2.0);
}

TEST(TotalLoss, EqualsCePlusLambdaKgAcrossGrid) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const double ce = rng.uniform(0, 3), kg = rng.uniform(0, 4);
    for (double lambda : kLambdaGrid) {
      const LossBreakdown b = total_loss(Tensor::scalar(ce), Tensor::scalar(kg), lambda);
      EXPECT_NEAR(b.total_value, ce + lambda * kg, 1e-12);
      EXPECT_EQ(b.total_value, b.total.item());
    }
  }
}

TEST(TotalLoss, LinearInLambda) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor ce = Tensor::scalar(rng.uniform(0, 3)), kg = Tensor::scalar(rng.uniform(0, 4));
    const double l1 = rng.uniform(0, 10), l2 = rng.uniform(0, 10);
    const double delta = total_loss(ce, kg, l1 + l2).total_value - total_loss(ce, kg, l1).total_value;
    EXPECT_NEAR(delta, l2 * kg.item(), 1e-12);
  }
}

TEST(TotalLoss, GradientIsCeGradPlusLambdaKgGrad) {
  Rng rng(6);
  const Tensor x = random_tensor({6}, rng, -1, 1, false);
  const Tensor ref = l2_normalize(random_tensor({3, 6}, rng, -1, 1, false));
  Tensor w = random_tensor({3, 6}, rng);
  const double lambda = 2.0;
  const auto ce_of = [&] { return cross_entropy(class_probabilities(x, l2_normalize(w), 0.1), 1); };
  const auto kg_of = [&] { return kg_loss(l2_normalize(w), ref); };

  w.zero_grad();
  ce_of().backward();
  const std::vector<double> g_ce(w.grad().begin(), w.grad().end());
  w.zero_grad();
  kg_of().backward();
  const std::vector<double> g_kg(w.grad().begin(), w.grad().end());
  w.zero_grad();
  total_loss(ce_of(), kg_of(), lambda).total.backward();
  for (std::size_t i = 0; i < g_ce.size(); ++i) {
    EXPECT_NEAR(w.grad()[i], g_ce[i] + lambda * g_kg[i], 1e-12);
  }
  EXPECT_LT(testing::gradient_error([&] { return total_loss(ce_of(), kg_of(), lambda).total; }, {w}),
            1e-4);
}

TEST(TotalLoss, NegativeLambdaIsInputError) {
  EXPECT_EQ(error_kind([] { total_loss(Tensor::scalar(1), Tensor::scalar(1), -0.5); }),
            ErrorKind::kInput);
}

}  // namespace
}  // namespace promim
