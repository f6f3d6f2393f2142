#pragma once

#include <cstddef>

#include "promim/tensor.hpp"

namespace promim {

inline constexpr double kDefaultKgWeight = 2.0;

/// Softmax over cosine similarities scaled by 1/tau.
struct ClassProbabilities {
  Tensor similarities;  // [C]
  Tensor logits;        // similarities / tau
  Tensor probs;         // [C], sums to 1
  double tau = 1.0;

  std::size_t num_classes() const { return probs.numel(); }
  std::size_t argmax() const;
};

/// p(y = i | x) = exp(cos(x, w_i) / tau) / sum_j exp(cos(x, w_j) / tau).
/// `image_embedding` is the full-image feature; `class_embeddings` is [C, D].
ClassProbabilities class_probabilities(const Tensor& image_embedding,
                                       const Tensor& class_embeddings, double tau);

/// -log p_label, evaluated through log-softmax of the logits.
Tensor cross_entropy(const ClassProbabilities& probs, std::size_t label);

/// Mean over classes of the squared Euclidean distance between learned and
/// reference class embeddings, both [N_c, D]. The reference side is
/// treated as a constant.
Tensor kg_loss(const Tensor& learned, const Tensor& reference);

struct LossBreakdown {
  Tensor total;  // differentiable ce + lambda * kg
  double ce = 0.0;
  double kg = 0.0;
  double lambda = 0.0;
  double total_value = 0.0;
};

LossBreakdown total_loss(const Tensor& ce, const Tensor& kg, double lambda);

}  // namespace promim
