#include "proto_ood/vocab.hpp"

#include <cctype>

#include "proto_ood/errors.hpp"

namespace proto_ood {

std::vector<std::string> tokenize_text(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

Vocabulary::Vocabulary() {
  tokens_.push_back("<unk>");
  ids_.emplace("<unk>", kUnknownId);
}

void Vocabulary::add_token(const std::string& token) {
  if (ids_.find(token) == ids_.end()) {
    ids_.emplace(token, static_cast<int>(tokens_.size()));
    tokens_.push_back(token);
  }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts) {
  Vocabulary vocab;
  for (const std::string& text : texts) {
    for (const std::string& token : tokenize_text(text)) vocab.add_token(token);
  }
  return vocab;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnknownId : it->second;
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const std::string& token : tokenize_text(text)) ids.push_back(id_of(token));
  return ids;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= static_cast<int>(tokens_.size())) {
    throw IndexError("token id " + std::to_string(id) + " out of vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

}  // namespace proto_ood
