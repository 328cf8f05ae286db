#pragma once

#include "proto_ood/tensor.hpp"

namespace proto_ood {

struct LossWeights {
  double lambda = 0.2;  // diversity weight
  double tau = 0.01;    // matching temperature
  void validate() const;
};

// Mean squared pairwise cosine over distinct prototype pairs:
// (1/K^2) * sum_i sum_{j != i} cos(p_i, p_j)^2. Exactly zero for K = 1.
Tensor diversity_loss(const Tensor& prototypes, Tape& tape);

// Temperature-scaled contrastive cross-entropy of a representation against
// all prototypes: -log softmax(cos(z, p_i)/tau)[target].
Tensor match_loss(const Tensor& z, const Tensor& prototypes, Index target, double tau,
                  Tape& tape);

// lambda * diversity + match. Rejects non-finite inputs.
Tensor joint_loss(const Tensor& match, const Tensor& diversity, double lambda, Tape& tape);

// Linear classification head for the discriminative baseline.
struct LinearHead {
  Tensor weight;  // K x d, trainable
  Tensor bias;    // K, trainable

  static LinearHead zeros(Index num_classes, Index dim);
  std::vector<Tensor> trainable_parameters() const { return {weight, bias}; }
};

Tensor head_logits(const LinearHead& head, const Tensor& z, Tape& tape);

// Softmax cross-entropy over head logits.
Tensor discriminative_loss(const Tensor& z, const LinearHead& head, Index target, Tape& tape);

}  // namespace proto_ood
