#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "proto_ood/encoder.hpp"
#include "proto_ood/tensor.hpp"
#include "proto_ood/vocab.hpp"

namespace proto_ood {

// How a class sequence is assembled: learnable tokens, category-name
// embeddings, or both, with the learnable part seeded from a scenario prompt
// or from a Gaussian.
enum class PrototypeVariant {
  ScenarioPromptPlusName,
  RandomPlusName,
  RandomOnly,
  NameOnly,
};

PrototypeVariant variant_from_string(const std::string& name);
std::string to_string(PrototypeVariant variant);

// Per-class prompted sequences: M learnable tokens followed by the frozen
// embedding rows of the category name. Prototypes are re-encoded from the
// current parameters on every forward pass.
struct ClassPrototypeSet {
  PrototypeVariant variant = PrototypeVariant::ScenarioPromptPlusName;
  Index soft_token_count = 0;  // M, shared across classes
  bool shared_soft_tokens = false;
  std::vector<std::string> class_names;
  std::vector<std::vector<int>> name_token_ids;  // empty per class for RandomOnly
  std::vector<Tensor> soft_tokens;  // K blocks [M x d]; single block when shared; empty for NameOnly

  Index num_classes() const { return static_cast<Index>(class_names.size()); }
  const Tensor& soft_block(Index class_index) const;
  Index sequence_length(Index class_index) const;
  std::vector<Tensor> trainable_parameters() const;
};

ClassPrototypeSet init_prototype_set(const std::vector<std::string>& classes,
                                     PrototypeVariant variant, const std::string& scenario,
                                     Index soft_token_count, const EncoderModel& model,
                                     const Vocabulary& vocab, std::uint64_t seed,
                                     bool shared_soft_tokens = false);

// Encodes every class sequence with the current soft tokens and adapters;
// row i is the prototype of class i. Differentiable w.r.t. soft tokens and
// LoRA parameters.
Tensor compute_prototypes(const ClassPrototypeSet& set, const EncoderModel& model, Tape& tape);

}  // namespace proto_ood
