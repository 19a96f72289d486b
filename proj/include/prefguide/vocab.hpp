// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace prefguide {

using TokenId = std::uint32_t;
using TokenIdSeq = std::vector<TokenId>;

inline constexpr TokenId kBos = 0;
inline constexpr TokenId kEos = 1;
inline constexpr TokenId kSep = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kNumSpecials = 4;

// Word-level normalization shared by the vocabulary, the models and the
// oracle judges: ASCII lowercase, split on (Unicode) whitespace, and peel
// leading/trailing ASCII punctuation off each word as one-character tokens.
std::vector<std::string> normalize_tokens(std::string_view text);

// Normalized tokens joined by single spaces.
std::string normalize_text(std::string_view text);

// Immutable token universe. Ids 0..3 are <bos>, <eos>, <sep>, <unk>.
class Vocab {
 public:
  Vocab();
  // Builds from an explicit token list that must start with the four specials.
  explicit Vocab(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view token) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

Vocab build_vocab(std::span<const std::string> corpus_texts, std::size_t min_freq,
                  std::size_t max_size);

TokenIdSeq encode(std::string_view text, const Vocab& vocab);

// Throws InvalidIdError for ids outside the vocabulary.
std::string decode(std::span<const TokenId> ids, const Vocab& vocab);

}  // namespace prefguide
