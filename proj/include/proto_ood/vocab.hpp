#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "proto_ood/tensor.hpp"

namespace proto_ood {

// Lowercases and splits on everything that is not a letter or digit.
std::vector<std::string> tokenize_text(const std::string& text);

// Token-to-id map. Id 0 is reserved for the unknown token; ids otherwise
// follow first appearance in the build corpus, which makes construction
// deterministic for a fixed input order.
class Vocabulary {
 public:
  static constexpr int kUnknownId = 0;

  Vocabulary();
  static Vocabulary build(const std::vector<std::string>& texts);

  int id_of(const std::string& token) const;
  std::vector<int> encode(const std::string& text) const;
  const std::string& token(int id) const;
  Index size() const { return static_cast<Index>(tokens_.size()); }

 private:
  void add_token(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace proto_ood
