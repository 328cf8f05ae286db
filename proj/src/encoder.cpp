#include "proto_ood/encoder.hpp"

#include <cmath>

#include "proto_ood/errors.hpp"
#include "proto_ood/rng.hpp"

namespace proto_ood {

namespace {
constexpr double kRmsEps = 1e-5;
constexpr double kInitStd = 0.02;
}  // namespace

RepLayer rep_layer_from_string(const std::string& name) {
  if (name == "final") return RepLayer::Final;
  if (name == "penultimate") return RepLayer::Penultimate;
  throw ConfigError("rep_layer must be 'final' or 'penultimate', got '" + name + "'");
}

std::string to_string(RepLayer layer) {
  return layer == RepLayer::Final ? "final" : "penultimate";
}

void EncoderConfig::validate() const {
  if (vocab_size < 1) throw ConfigError("vocab_size must be >= 1");
  if (embed_dim < 1 || n_heads < 1 || embed_dim % n_heads != 0) {
    throw ConfigError("embed_dim (" + std::to_string(embed_dim) +
                      ") must be a positive multiple of n_heads (" + std::to_string(n_heads) + ")");
  }
  if (n_layers < 1) throw ConfigError("n_layers must be >= 1");
  if (mlp_ratio < 1) throw ConfigError("mlp_ratio must be >= 1");
  if (lora_rank < 1 || lora_rank > embed_dim) {
    throw ConfigError("lora_rank must satisfy 1 <= r <= embed_dim, got " +
                      std::to_string(lora_rank));
  }
  if (max_seq_len < 1) throw ConfigError("max_seq_len must be >= 1");
  if (rep_layer == RepLayer::Penultimate && n_layers < 2) {
    throw ConfigError("rep_layer=penultimate needs n_layers >= 2");
  }
}

LoraLinear LoraLinear::init(Index d_out, Index d_in, Index rank, double alpha, Rng& rng) {
  LoraLinear l;
  l.base = Tensor::gaussian({d_out, d_in}, kInitStd, rng, false);
  l.lora_a = Tensor::gaussian({rank, d_in}, kInitStd, rng, true);
  l.lora_b = Tensor::zeros({d_out, rank}, true);
  l.scale = alpha / static_cast<double>(rank);
  return l;
}

Tensor lora_forward(const LoraLinear& layer, const Tensor& x, Tape& tape) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw ShapeError("lora_forward: expected rank-1 or rank-2 input, got " +
                     shape_to_string(x.shape()));
  }
  const Index d_in = layer.base.cols();
  const Index in_width = x.rank() == 1 ? x.shape()[0] : x.shape()[1];
  if (in_width != d_in) {
    throw ShapeError("lora_forward: input width " + std::to_string(in_width) +
                     " does not match d_in " + std::to_string(d_in));
  }
  const bool vector_input = x.rank() == 1;
  Tensor rows = vector_input ? reshape(x, {1, d_in}, tape) : x;
  Tensor base_out = matmul(rows, transpose(layer.base, tape), tape);
  Tensor delta = matmul(matmul(rows, transpose(layer.lora_a, tape), tape),
                        transpose(layer.lora_b, tape), tape);
  Tensor out = add(base_out, scale(delta, layer.scale, tape), tape);
  return vector_input ? reshape(out, {layer.base.rows()}, tape) : out;
}

EncoderModel::EncoderModel(EncoderConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(Rng::mix(seed, 0x656e636f646572ULL));
  const Index d = config_.embed_dim;
  const Index h = config_.mlp_dim();
  embed_table_ = Tensor::gaussian({config_.vocab_size, d}, kInitStd, rng, false);
  layers_.reserve(static_cast<std::size_t>(config_.n_layers));
  for (Index i = 0; i < config_.n_layers; ++i) {
    EncoderLayer layer;
    layer.attn.norm_gain = Tensor::full({d}, 1.0, false);
    layer.attn.wq = LoraLinear::init(d, d, config_.lora_rank, config_.lora_alpha, rng);
    layer.attn.wk = LoraLinear::init(d, d, config_.lora_rank, config_.lora_alpha, rng);
    layer.attn.wv = LoraLinear::init(d, d, config_.lora_rank, config_.lora_alpha, rng);
    layer.attn.wo = LoraLinear::init(d, d, config_.lora_rank, config_.lora_alpha, rng);
    layer.ffn.norm_gain = Tensor::full({d}, 1.0, false);
    layer.ffn.w_gate = Tensor::gaussian({h, d}, kInitStd, rng, false);
    layer.ffn.w_up = Tensor::gaussian({h, d}, kInitStd, rng, false);
    layer.ffn.w_down = Tensor::gaussian({d, h}, kInitStd, rng, false);
    layers_.push_back(std::move(layer));
  }
  final_norm_gain_ = Tensor::full({d}, 1.0, false);
}

Tensor EncoderModel::embedding_row(int token_id) const {
  if (token_id < 0 || token_id >= config_.vocab_size) {
    throw IndexError("token id " + std::to_string(token_id) + " out of vocabulary of size " +
                     std::to_string(config_.vocab_size));
  }
  const Index d = config_.embed_dim;
  Tensor out = Tensor::zeros({d});
  out.values() = embed_table_.values().segment(static_cast<Index>(token_id) * d, d);
  return out;
}

Tensor EncoderModel::embedding_rows(const std::vector<int>& token_ids) const {
  if (token_ids.empty()) throw ValueError("embedding_rows: empty token sequence");
  const Index d = config_.embed_dim;
  Tensor out = Tensor::zeros({static_cast<Index>(token_ids.size()), d});
  for (std::size_t i = 0; i < token_ids.size(); ++i) {
    const int id = token_ids[i];
    if (id < 0 || id >= config_.vocab_size) {
      throw IndexError("token id " + std::to_string(id) + " out of vocabulary of size " +
                       std::to_string(config_.vocab_size));
    }
    out.values().segment(static_cast<Index>(i) * d, d) =
        embed_table_.values().segment(static_cast<Index>(id) * d, d);
  }
  return out;
}

Tensor EncoderModel::block_forward(const EncoderLayer& layer, const Tensor& x, Tape& tape) const {
  const Index heads = config_.n_heads;
  const Index dh = config_.head_dim();
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor h = rms_norm(x, layer.attn.norm_gain, kRmsEps, tape);
  Tensor q = lora_forward(layer.attn.wq, h, tape);
  Tensor k = lora_forward(layer.attn.wk, h, tape);
  Tensor v = lora_forward(layer.attn.wv, h, tape);

  std::vector<Tensor> head_outputs;
  head_outputs.reserve(static_cast<std::size_t>(heads));
  for (Index i = 0; i < heads; ++i) {
    Tensor qh = slice_cols(q, i * dh, dh, tape);
    Tensor kh = slice_cols(k, i * dh, dh, tape);
    Tensor vh = slice_cols(v, i * dh, dh, tape);
    Tensor scores = scale(matmul(qh, transpose(kh, tape), tape), inv_sqrt_dh, tape);
    Tensor probs = softmax_causal(scores, tape);
    head_outputs.push_back(matmul(probs, vh, tape));
  }
  Tensor attn_out = lora_forward(layer.attn.wo, concat_cols(head_outputs, tape), tape);
  Tensor mid = add(x, attn_out, tape);

  Tensor h2 = rms_norm(mid, layer.ffn.norm_gain, kRmsEps, tape);
  Tensor gated = silu(matmul(h2, transpose(layer.ffn.w_gate, tape), tape), tape);
  Tensor up = matmul(h2, transpose(layer.ffn.w_up, tape), tape);
  Tensor ffn_out = matmul(mul(gated, up, tape), transpose(layer.ffn.w_down, tape), tape);
  return add(mid, ffn_out, tape);
}

Tensor EncoderModel::hidden_states_before(const Tensor& rows, Index n_blocks, Tape& tape) const {
  Tensor x = rows;
  for (Index i = 0; i < n_blocks; ++i) {
    x = block_forward(layers_[static_cast<std::size_t>(i)], x, tape);
  }
  return x;
}

Tensor EncoderModel::hidden_states(const Tensor& rows, Tape& tape) const {
  Tensor x = hidden_states_before(rows, config_.n_layers, tape);
  return rms_norm(x, final_norm_gain_, kRmsEps, tape);
}

std::vector<Tensor> EncoderModel::trainable_parameters() const {
  std::vector<Tensor> params;
  for (const EncoderLayer& layer : layers_) {
    for (const LoraLinear* l : {&layer.attn.wq, &layer.attn.wk, &layer.attn.wv, &layer.attn.wo}) {
      params.push_back(l->lora_a);
      params.push_back(l->lora_b);
    }
  }
  return params;
}

std::vector<std::pair<std::string, Tensor>> EncoderModel::named_tensors() const {
  std::vector<std::pair<std::string, Tensor>> named;
  named.emplace_back("embed.table", embed_table_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string prefix = "layers." + std::to_string(i) + ".";
    const EncoderLayer& layer = layers_[i];
    named.emplace_back(prefix + "attn.norm", layer.attn.norm_gain);
    const std::pair<std::string, const LoraLinear*> projections[] = {
        {"wq", &layer.attn.wq}, {"wk", &layer.attn.wk}, {"wv", &layer.attn.wv}, {"wo", &layer.attn.wo}};
    for (const auto& [name, l] : projections) {
      named.emplace_back(prefix + "attn." + name + ".base", l->base);
      named.emplace_back(prefix + "attn." + name + ".lora_a", l->lora_a);
      named.emplace_back(prefix + "attn." + name + ".lora_b", l->lora_b);
    }
    named.emplace_back(prefix + "ffn.norm", layer.ffn.norm_gain);
    named.emplace_back(prefix + "ffn.gate", layer.ffn.w_gate);
    named.emplace_back(prefix + "ffn.up", layer.ffn.w_up);
    named.emplace_back(prefix + "ffn.down", layer.ffn.w_down);
  }
  named.emplace_back("final_norm", final_norm_gain_);
  return named;
}

Tensor encode_embeddings(const EncoderModel& model, const Tensor& rows, Tape& tape) {
  const EncoderConfig& cfg = model.config();
  if (rows.rank() != 2 || rows.cols() != cfg.embed_dim) {
    throw ShapeError("encode_embeddings: expected [L x " + std::to_string(cfg.embed_dim) +
                     "] rows, got " + shape_to_string(rows.shape()));
  }
  if (rows.rows() > cfg.max_seq_len) {
    throw ShapeError("encode_embeddings: sequence length " + std::to_string(rows.rows()) +
                     " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
  }
  Tensor states;
  if (cfg.rep_layer == RepLayer::Penultimate) {
    states = model.hidden_states_before(rows, cfg.n_layers - 1, tape);
  } else {
    states = model.hidden_states(rows, tape);
  }
  return row(states, rows.rows() - 1, tape);
}

Tensor encode_tokens(const EncoderModel& model, const std::vector<int>& tokens, Tape& tape) {
  if (tokens.empty()) throw ValueError("encode_tokens: empty token sequence");
  return encode_embeddings(model, model.embedding_rows(tokens), tape);
}

}  // namespace proto_ood
