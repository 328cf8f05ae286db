#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "proto_ood/ops.hpp"
#include "proto_ood/tensor.hpp"

namespace proto_ood {

class Rng;

// Which hidden state feeds the sentence representation: the output of the
// final block (after the final normalization) or the residual stream entering
// the last block. Both read the last sequence position.
enum class RepLayer { Final, Penultimate };

RepLayer rep_layer_from_string(const std::string& name);
std::string to_string(RepLayer layer);

struct EncoderConfig {
  Index vocab_size = 0;
  Index embed_dim = 64;
  Index n_layers = 2;
  Index n_heads = 4;
  Index mlp_ratio = 4;
  Index lora_rank = 4;
  double lora_alpha = 4.0;
  Index max_seq_len = 64;
  RepLayer rep_layer = RepLayer::Final;

  Index head_dim() const { return embed_dim / n_heads; }
  Index mlp_dim() const { return embed_dim * mlp_ratio; }
  void validate() const;  // throws ConfigError
};

// Frozen base projection with a trainable low-rank update:
// y = W x + (alpha / r) * B (A x). B starts at zero, so the update is an
// exact identity at initialization.
struct LoraLinear {
  Tensor base;    // d_out x d_in, frozen
  Tensor lora_a;  // r x d_in, trainable
  Tensor lora_b;  // d_out x r, trainable, zero-initialized
  double scale = 1.0;

  static LoraLinear init(Index d_out, Index d_in, Index rank, double alpha, Rng& rng);
};

// Accepts a rank-1 vector [d_in] or a rank-2 row batch [L x d_in].
Tensor lora_forward(const LoraLinear& layer, const Tensor& x, Tape& tape);

struct AttentionBlock {
  Tensor norm_gain;  // frozen
  LoraLinear wq, wk, wv, wo;
};

struct FeedForward {
  Tensor norm_gain;              // frozen
  Tensor w_gate, w_up, w_down;   // frozen
};

struct EncoderLayer {
  AttentionBlock attn;
  FeedForward ffn;
};

// Causal transformer encoder in the pre-normalization, gated-feed-forward
// family. The backbone (embeddings, projections, norms) is drawn once from a
// seeded Gaussian and frozen; only the LoRA adapters on the four attention
// projections train.
class EncoderModel {
 public:
  EncoderModel(EncoderConfig config, std::uint64_t seed);
  EncoderModel(const EncoderModel&) = delete;
  EncoderModel& operator=(const EncoderModel&) = delete;
  EncoderModel(EncoderModel&&) = default;
  EncoderModel& operator=(EncoderModel&&) = default;

  const EncoderConfig& config() const { return config_; }

  // Constant [L x d] tensor of embedding-table rows for a token sequence.
  Tensor embedding_rows(const std::vector<int>& token_ids) const;
  // Single embedding row as a rank-1 constant.
  Tensor embedding_row(int token_id) const;

  // All-position hidden states after every block plus the final
  // normalization, [L x d]. Used by causality probes and tests.
  Tensor hidden_states(const Tensor& rows, Tape& tape) const;

  // Hidden states after the first `n_blocks` blocks, no final normalization.
  Tensor hidden_states_before(const Tensor& rows, Index n_blocks, Tape& tape) const;

  std::vector<Tensor> trainable_parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_tensors() const;

  const std::vector<EncoderLayer>& layers() const { return layers_; }
  const Tensor& embedding_table() const { return embed_table_; }

 private:
  Tensor block_forward(const EncoderLayer& layer, const Tensor& x, Tape& tape) const;

  EncoderConfig config_;
  Tensor embed_table_;  // vocab x d, frozen
  std::vector<EncoderLayer> layers_;
  Tensor final_norm_gain_;  // frozen
};

// Representation of a token sequence: the configured hidden state at the last
// position, differentiable through the LoRA adapters.
Tensor encode_tokens(const EncoderModel& model, const std::vector<int>& tokens, Tape& tape);

// Same computation with the embedding lookup bypassed, so trainable rows
// (soft prompt tokens) can be injected. Differentiable w.r.t. `rows`.
Tensor encode_embeddings(const EncoderModel& model, const Tensor& rows, Tape& tape);

}  // namespace proto_ood
