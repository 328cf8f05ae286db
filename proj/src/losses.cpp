#include "proto_ood/losses.hpp"

#include <cmath>

#include "proto_ood/errors.hpp"
#include "proto_ood/ops.hpp"

namespace proto_ood {

void LossWeights::validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
}

Tensor diversity_loss(const Tensor& prototypes, Tape& tape) {
  if (prototypes.rank() != 2) {
    throw ShapeError("diversity_loss: expected [K x d] prototypes, got " +
                     shape_to_string(prototypes.shape()));
  }
  const Index k = prototypes.rows();
  if (k == 1) return Tensor::scalar(0.0);
  std::vector<Tensor> squared;
  squared.reserve(static_cast<std::size_t>(k * (k - 1) / 2));
  for (Index i = 0; i < k; ++i) {
    Tensor pi = row(prototypes, i, tape);
    for (Index j = i + 1; j < k; ++j) {
      Tensor c = cosine(pi, row(prototypes, j, tape), tape);
      squared.push_back(mul(c, c, tape));
    }
  }
  // Each unordered pair appears twice in the double sum.
  Tensor total = sum(stack_scalars(squared, tape), tape);
  return scale(total, 2.0 / static_cast<double>(k * k), tape);
}

Tensor match_loss(const Tensor& z, const Tensor& prototypes, Index target, double tau,
                  Tape& tape) {
  if (!(tau > 0.0)) throw ConfigError("match_loss: tau must be > 0");
  if (prototypes.rank() != 2) {
    throw ShapeError("match_loss: expected [K x d] prototypes, got " +
                     shape_to_string(prototypes.shape()));
  }
  const Index k = prototypes.rows();
  if (target < 0 || target >= k) {
    throw IndexError("match_loss: target " + std::to_string(target) + " out of range for " +
                     std::to_string(k) + " classes");
  }
  std::vector<Tensor> similarities;
  similarities.reserve(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) {
    similarities.push_back(cosine(z, row(prototypes, i, tape), tape));
  }
  Tensor logits = scale(stack_scalars(similarities, tape), 1.0 / tau, tape);
  return softmax_cross_entropy(logits, target, tape);
}

Tensor joint_loss(const Tensor& match, const Tensor& diversity, double lambda, Tape& tape) {
  if (match.numel() != 1 || diversity.numel() != 1) {
    throw ShapeError("joint_loss: expected scalar inputs");
  }
  if (!std::isfinite(match.value()) || !std::isfinite(diversity.value())) {
    throw ValueError("joint_loss: non-finite input");
  }
  return add(scale(diversity, lambda, tape), match, tape);
}

LinearHead LinearHead::zeros(Index num_classes, Index dim) {
  LinearHead head;
  head.weight = Tensor::zeros({num_classes, dim}, true);
  head.bias = Tensor::zeros({num_classes}, true);
  return head;
}

Tensor head_logits(const LinearHead& head, const Tensor& z, Tape& tape) {
  if (z.rank() != 1 || z.shape()[0] != head.weight.cols()) {
    throw ShapeError("head_logits: representation shape " + shape_to_string(z.shape()) +
                     " does not match head " + shape_to_string(head.weight.shape()));
  }
  const Index k = head.weight.rows();
  Tensor column = reshape(z, {z.shape()[0], 1}, tape);
  Tensor logits = reshape(matmul(head.weight, column, tape), {k}, tape);
  return add(logits, head.bias, tape);
}

Tensor discriminative_loss(const Tensor& z, const LinearHead& head, Index target, Tape& tape) {
  return softmax_cross_entropy(head_logits(head, z, tape), target, tape);
}

}  // namespace proto_ood
