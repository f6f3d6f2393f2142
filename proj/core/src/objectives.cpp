#include "promim/objectives.hpp"

#include <algorithm>

#include "promim/error.hpp"

namespace promim {

namespace {
constexpr std::string_view kModule = "objectives";
}

std::size_t ClassProbabilities::argmax() const {
  const auto p = logits.data();
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

ClassProbabilities class_probabilities(const Tensor& image_embedding,
                                       const Tensor& class_embeddings, double tau) {
  if (!(tau > 0.0)) raise(ErrorKind::kInput, kModule, "temperature must be positive");
  if (class_embeddings.rank() != 2) {
    raise(ErrorKind::kDimension, kModule, "class embeddings must be a [C, D] matrix");
  }
  const std::size_t C = class_embeddings.dim(0), D = class_embeddings.dim(1);
  if (C < 2) raise(ErrorKind::kInput, kModule, "need at least two classes");
  if (image_embedding.numel() != D) {
    raise(ErrorKind::kDimension, kModule,
          "image embedding has " + std::to_string(image_embedding.numel()) +
              " values, class embeddings have " + std::to_string(D));
  }
  const Tensor x = l2_normalize(reshape(image_embedding, {1, D}));
  const Tensor w = l2_normalize(class_embeddings);
  ClassProbabilities out;
  out.tau = tau;
  out.similarities = reshape(matmul(w, transpose(x)), {C});
  out.logits = scale(out.similarities, 1.0 / tau);
  out.probs = softmax(out.logits, 0);
  return out;
}

Tensor cross_entropy(const ClassProbabilities& probs, std::size_t label) {
  if (label >= probs.num_classes()) {
    raise(ErrorKind::kInput, kModule,
          "label " + std::to_string(label) + " outside [0, " +
              std::to_string(probs.num_classes()) + ")");
  }
  const std::size_t idx[1] = {label};
  return scale(reshape(select(log_softmax(probs.logits, 0), idx), {}), -1.0);
}

Tensor kg_loss(const Tensor& learned, const Tensor& reference) {
  if (learned.rank() != 2 || reference.rank() != 2) {
    raise(ErrorKind::kDimension, kModule, "kg_loss expects [N_c, D] matrices");
  }
  if (learned.dim(0) != reference.dim(0)) {
    raise(ErrorKind::kInput, kModule,
          "kg_loss class count mismatch: " + std::to_string(learned.dim(0)) + " vs " +
              std::to_string(reference.dim(0)));
  }
  if (learned.dim(1) != reference.dim(1)) {
    raise(ErrorKind::kDimension, kModule, "kg_loss embedding width mismatch");
  }
  if (learned.dim(0) == 0) raise(ErrorKind::kInput, kModule, "kg_loss needs at least one class");
  const Tensor diff = sub(learned, reference.detach());
  return scale(sum(mul(diff, diff)), 1.0 / static_cast<double>(learned.dim(0)));
}

LossBreakdown total_loss(const Tensor& ce, const Tensor& kg, double lambda) {
  if (!(lambda >= 0.0)) raise(ErrorKind::kInput, kModule, "lambda must be non-negative");
  if (ce.numel() != 1 || kg.numel() != 1) {
    raise(ErrorKind::kDimension, kModule, "loss terms must be scalars");
  }
  LossBreakdown out;
  out.total = add(reshape(ce, {}), scale(reshape(kg, {}), lambda));
  out.ce = ce.item();
  out.kg = kg.item();
  out.lambda = lambda;
  out.total_value = out.total.item();
  return out;
}

}  // namespace promim
