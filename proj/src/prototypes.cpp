#include "proto_ood/prototypes.hpp"

#include "proto_ood/errors.hpp"
#include "proto_ood/rng.hpp"

namespace proto_ood {

PrototypeVariant variant_from_string(const std::string& name) {
  if (name == "scenario") return PrototypeVariant::ScenarioPromptPlusName;
  if (name == "random-name") return PrototypeVariant::RandomPlusName;
  if (name == "random") return PrototypeVariant::RandomOnly;
  if (name == "name-only") return PrototypeVariant::NameOnly;
  throw ConfigError("unknown prototype variant '" + name +
                    "', expected scenario|random-name|random|name-only");
}

std::string to_string(PrototypeVariant variant) {
  switch (variant) {
    case PrototypeVariant::ScenarioPromptPlusName: return "scenario";
    case PrototypeVariant::RandomPlusName: return "random-name";
    case PrototypeVariant::RandomOnly: return "random";
    case PrototypeVariant::NameOnly: return "name-only";
  }
  throw ConfigError("unhandled prototype variant");
}

const Tensor& ClassPrototypeSet::soft_block(Index class_index) const {
  if (soft_tokens.empty()) throw StateError("prototype set has no soft tokens");
  return shared_soft_tokens ? soft_tokens.front()
                            : soft_tokens[static_cast<std::size_t>(class_index)];
}

Index ClassPrototypeSet::sequence_length(Index class_index) const {
  return soft_token_count +
         static_cast<Index>(name_token_ids[static_cast<std::size_t>(class_index)].size());
}

std::vector<Tensor> ClassPrototypeSet::trainable_parameters() const {
  return soft_tokens;
}

namespace {

bool has_name_tokens(PrototypeVariant v) { return v != PrototypeVariant::RandomOnly; }
bool has_soft_tokens(PrototypeVariant v) { return v != PrototypeVariant::NameOnly; }

}  // namespace

ClassPrototypeSet init_prototype_set(const std::vector<std::string>& classes,
                                     PrototypeVariant variant, const std::string& scenario,
                                     Index soft_token_count, const EncoderModel& model,
                                     const Vocabulary& vocab, std::uint64_t seed,
                                     bool shared_soft_tokens) {
  if (classes.empty()) throw ValueError("init_prototype_set: empty class list");
  if (variant == PrototypeVariant::NameOnly && soft_token_count > 0) {
    throw ConfigError("name-only prototypes take no learnable tokens, got M=" +
                      std::to_string(soft_token_count));
  }
  if (has_soft_tokens(variant) && soft_token_count < 1) {
    throw ConfigError("variant '" + to_string(variant) + "' needs at least one learnable token");
  }

  ClassPrototypeSet set;
  set.variant = variant;
  set.soft_token_count = has_soft_tokens(variant) ? soft_token_count : 0;
  set.shared_soft_tokens = shared_soft_tokens;
  set.class_names = classes;

  const Index d = model.config().embed_dim;
  const Index k = static_cast<Index>(classes.size());

  set.name_token_ids.resize(classes.size());
  if (has_name_tokens(variant)) {
    for (std::size_t i = 0; i < classes.size(); ++i) {
      std::vector<int> ids = vocab.encode(classes[i]);
      if (ids.empty()) {
        throw DataError("class name '" + classes[i] + "' contains no tokens");
      }
      set.name_token_ids[i] = std::move(ids);
    }
  }

  if (has_soft_tokens(variant)) {
    const Index blocks = shared_soft_tokens ? 1 : k;
    if (variant == PrototypeVariant::ScenarioPromptPlusName) {
      // Every block starts from the embedding rows of "<scenario> intent of",
      // cycled to length M.
      const std::vector<int> prompt_ids = vocab.encode(scenario + " intent of");
      Tensor prompt_rows = model.embedding_rows(prompt_ids);
      Tensor block = Tensor::zeros({soft_token_count, d}, true);
      for (Index m = 0; m < soft_token_count; ++m) {
        const Index src = m % static_cast<Index>(prompt_ids.size());
        block.values().segment(m * d, d) = prompt_rows.values().segment(src * d, d);
      }
      set.soft_tokens.push_back(block);
      for (Index b = 1; b < blocks; ++b) {
        Tensor copy = block.clone();
        set.soft_tokens.push_back(copy);
      }
    } else {
      Rng rng(Rng::mix(seed, 0x70726f746fULL));
      for (Index b = 0; b < blocks; ++b) {
        set.soft_tokens.push_back(Tensor::gaussian({soft_token_count, d}, 0.02, rng, true));
      }
    }
  }
  return set;
}

Tensor compute_prototypes(const ClassPrototypeSet& set, const EncoderModel& model, Tape& tape) {
  const Index k = set.num_classes();
  std::vector<Tensor> rows;
  rows.reserve(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) {
    std::vector<Tensor> parts;
    if (set.soft_token_count > 0) parts.push_back(set.soft_block(i));
    const std::vector<int>& name_ids = set.name_token_ids[static_cast<std::size_t>(i)];
    if (!name_ids.empty()) parts.push_back(model.embedding_rows(name_ids));
    Tensor sequence = concat_rows(parts, tape);
    rows.push_back(encode_embeddings(model, sequence, tape));
  }
  return concat_rows(rows, tape);
}

}  // namespace proto_ood
