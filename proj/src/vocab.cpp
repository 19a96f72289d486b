// SPDX-License-Identifier: Apache-2.0
#include "prefguide/vocab.hpp"

#include <algorithm>
#include <map>

#include "prefguide/error.hpp"

namespace prefguide {

namespace {

constexpr std::string_view kSpecialNames[kNumSpecials] = {"<bos>", "<eos>", "<sep>", "<unk>"};

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
         (c >= 123 && c <= 126);
}

// Length in bytes of a UTF-8 encoded Unicode whitespace code point at pos, or 0.
std::size_t unicode_space_len(std::string_view s, std::size_t pos) {
  const auto b = [&](std::size_t i) -> unsigned char {
    return pos + i < s.size() ? static_cast<unsigned char>(s[pos + i]) : 0;
  };
  if (is_ascii_space(b(0))) {
    return 1;
  }
  // U+0085, U+00A0
  if (b(0) == 0xC2 && (b(1) == 0x85 || b(1) == 0xA0)) {
    return 2;
  }
  // U+1680
  if (b(0) == 0xE1 && b(1) == 0x9A && b(2) == 0x80) {
    return 3;
  }
  if (b(0) == 0xE2 && b(1) == 0x80) {
    // U+2000..U+200A, U+2028, U+2029, U+202F
    const unsigned char c = b(2);
    if ((c >= 0x80 && c <= 0x8A) || c == 0xA8 || c == 0xA9 || c == 0xAF) {
      return 3;
    }
  }
  // U+205F
  if (b(0) == 0xE2 && b(1) == 0x81 && b(2) == 0x9F) {
    return 3;
  }
  // U+3000
  if (b(0) == 0xE3 && b(1) == 0x80 && b(2) == 0x80) {
    return 3;
  }
  return 0;
}

void push_word(std::string_view word, std::vector<std::string>& out) {
  std::size_t begin = 0;
  std::size_t end = word.size();
  while (begin < end && is_ascii_punct(static_cast<unsigned char>(word[begin]))) {
    out.emplace_back(1, word[begin]);
    ++begin;
  }
  std::size_t trail = end;
  while (trail > begin && is_ascii_punct(static_cast<unsigned char>(word[trail - 1]))) {
    --trail;
  }
  if (trail > begin) {
    std::string core(word.substr(begin, trail - begin));
    for (auto& ch : core) {
      if (ch >= 'A' && ch <= 'Z') {
        ch = static_cast<char>(ch - 'A' + 'a');
      }
    }
    out.push_back(std::move(core));
  }
  for (std::size_t i = trail; i < end; ++i) {
    out.emplace_back(1, word[i]);
  }
}

}  // namespace

std::vector<std::string> normalize_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  std::size_t word_start = 0;
  while (pos < text.size()) {
    const std::size_t len = unicode_space_len(text, pos);
    if (len > 0) {
      if (pos > word_start) {
        push_word(text.substr(word_start, pos - word_start), out);
      }
      pos += len;
      word_start = pos;
    } else {
      ++pos;
    }
  }
  if (pos > word_start) {
    push_word(text.substr(word_start, pos - word_start), out);
  }
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  for (const auto& tok : normalize_tokens(text)) {
    if (!out.empty()) {
      out += ' ';
    }
    out += tok;
  }
  return out;
}

Vocab::Vocab() : Vocab(std::vector<std::string>(std::begin(kSpecialNames), std::end(kSpecialNames))) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kNumSpecials) {
    throw ParameterError("vocabulary must contain the four special tokens");
  }
  for (std::size_t i = 0; i < kNumSpecials; ++i) {
    if (tokens_[i] != kSpecialNames[i]) {
      throw ParameterError("special token " + std::string(kSpecialNames[i]) + " must have id " +
                           std::to_string(i));
    }
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw ParameterError("duplicate vocabulary token: " + tokens_[i]);
    }
  }
}

const std::string& Vocab::token(TokenId id) const {
  if (id >= tokens_.size()) {
    throw InvalidIdError("token id " + std::to_string(id) + " out of range for vocabulary of size " +
                         std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

Vocab build_vocab(std::span<const std::string> corpus_texts, std::size_t min_freq,
                  std::size_t max_size) {
  if (max_size < kNumSpecials) {
    throw ParameterError("max_size must leave room for the special tokens");
  }
  if (min_freq == 0) {
    throw ParameterError("min_freq must be positive");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& text : corpus_texts) {
    for (auto& tok : normalize_tokens(text)) {
      ++counts[std::move(tok)];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    if (n >= min_freq) {
      ranked.emplace_back(tok, n);
    }
  }
  // counts is already in ascending lexicographic order, so a stable sort on
  // frequency keeps the lexicographic tie-break.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens(std::begin(kSpecialNames), std::end(kSpecialNames));
  for (auto& [tok, n] : ranked) {
    if (tokens.size() >= max_size) {
      break;
    }
    tokens.push_back(std::move(tok));
  }
  return Vocab(std::move(tokens));
}

TokenIdSeq encode(std::string_view text, const Vocab& vocab) {
  TokenIdSeq ids;
  for (const auto& tok : normalize_tokens(text)) {
    ids.push_back(vocab.find(tok).value_or(kUnk));
  }
  return ids;
}

std::string decode(std::span<const TokenId> ids, const Vocab& vocab) {
  std::string out;
  for (const TokenId id : ids) {
    const auto& tok = vocab.token(id);
    if (!out.empty()) {
      out += ' ';
    }
    out += tok;
  }
  return out;
}

}  // namespace prefguide
