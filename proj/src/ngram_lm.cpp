// SPDX-License-Identifier: Apache-2.0
#include "prefguide/ngram_lm.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace prefguide {

NgramLM::NgramLM(std::size_t vocab_size, const NgramConfig& config, Warnings* warnings)
    : order_(config.order), k_(config.k), lambdas_(config.lambdas), vocab_size_(vocab_size) {
  if (order_ < 1) {
    throw ParameterError("n-gram order must be >= 1");
  }
  if (lambdas_.size() != order_) {
    throw ParameterError("need exactly one interpolation weight per order");
  }
  if (!(k_ >= 0.0) || !std::isfinite(k_)) {
    throw ParameterError("add-k constant must be finite and >= 0");
  }
  if (vocab_size_ == 0) {
    throw ParameterError("empty vocabulary");
  }
  double sum = 0.0;
  for (const double l : lambdas_) {
    if (!(l >= 0.0) || !std::isfinite(l)) {
      throw ParameterError("interpolation weights must be finite and >= 0");
    }
    sum += l;
  }
  if (sum <= 0.0) {
    throw ParameterError("interpolation weights sum to zero");
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    for (auto& l : lambdas_) {
      l /= sum;
    }
    if (warnings != nullptr) {
      std::ostringstream msg;
      msg << "interpolation weights summed to " << sum << "; normalized";
      warnings->add(msg.str());
    }
  }
  tables_.resize(order_);
}

NgramLM::NgramLM(std::size_t vocab_size, const NgramConfig& config,
                 std::span<const TokenIdSeq> sequences, Warnings* warnings)
    : NgramLM(vocab_size, config, warnings) {
  for (const auto& seq : sequences) {
    for (const TokenId id : seq) {
      if (id >= vocab_size_) {
        throw InvalidIdError("token id " + std::to_string(id) + " outside vocabulary");
      }
    }
    for (std::size_t i = 0; i < seq.size(); ++i) {
      for (std::size_t j = 1; j <= order_ && j - 1 <= i; ++j) {
        TokenIdSeq ctx(seq.begin() + static_cast<std::ptrdiff_t>(i - (j - 1)),
                       seq.begin() + static_cast<std::ptrdiff_t>(i));
        auto& entry = tables_[j - 1][std::move(ctx)];
        ++entry.total;
        ++entry.counts[seq[i]];
      }
    }
  }
}

NgramLM NgramLM::from_counts(std::size_t vocab_size, const NgramConfig& config,
                             const std::vector<std::vector<CountTriple>>& triples) {
  NgramLM lm(vocab_size, config, nullptr);
  if (triples.size() != lm.order_) {
    throw ParameterError("count tables do not match the model order");
  }
  for (std::size_t j = 1; j <= lm.order_; ++j) {
    for (const auto& t : triples[j - 1]) {
      if (t.context.size() != j - 1 || t.token >= vocab_size || t.count == 0) {
        throw ParameterError("malformed count triple at order " + std::to_string(j));
      }
      for (const TokenId id : t.context) {
        if (id >= vocab_size) {
          throw ParameterError("count triple context id outside vocabulary");
        }
      }
      auto& entry = lm.tables_[j - 1][t.context];
      if (!entry.counts.emplace(t.token, t.count).second) {
        throw ParameterError("duplicate count triple at order " + std::to_string(j));
      }
      entry.total += t.count;
    }
  }
  return lm;
}

void NgramLM::check_context(std::span<const TokenId> context) const {
  for (const TokenId id : context) {
    if (id >= vocab_size_) {
      throw InvalidIdError("context id " + std::to_string(id) + " outside vocabulary");
    }
  }
}

const NgramLM::ContextTable* NgramLM::lookup(std::size_t j,
                                             std::span<const TokenId> context) const {
  if (context.size() < j - 1) {
    return nullptr;
  }
  const auto tail = context.subspan(context.size() - (j - 1));
  const TokenIdSeq key(tail.begin(), tail.end());
  const auto& table = tables_[j - 1];
  const auto it = table.find(key);
  return it == table.end() ? nullptr : &it->second;
}

NextTokenDistribution NgramLM::next_token_dist(std::span<const TokenId> context,
                                               OpCounters* counters) const {
  check_context(context);
  if (counters != nullptr) {
    ++counters->lm_calls;
  }
  const double v_size = static_cast<double>(vocab_size_);
  NextTokenDistribution dist{std::vector<double>(vocab_size_, 0.0)};
  auto& p = dist.probs;
  for (std::size_t j = 1; j <= order_; ++j) {
    const double lambda = lambdas_[j - 1];
    const ContextTable* entry = lookup(j, context);
    if (entry == nullptr || entry->total == 0) {
      const double term = lambda * (1.0 / v_size);
      for (auto& x : p) {
        x += term;
      }
      continue;
    }
    const double denom = static_cast<double>(entry->total) + k_ * v_size;
    const double base = lambda * ((0.0 + k_) / denom);
    auto it = entry->counts.begin();
    for (TokenId v = 0; v < vocab_size_; ++v) {
      if (it != entry->counts.end() && it->first == v) {
        p[v] += lambda * ((static_cast<double>(it->second) + k_) / denom);
        ++it;
      } else {
        p[v] += base;
      }
    }
  }
  return dist;
}

double NgramLM::order_prob(std::size_t j, std::span<const TokenId> context, TokenId v) const {
  if (j < 1 || j > order_) {
    throw ParameterError("order out of range");
  }
  if (v >= vocab_size_) {
    throw InvalidIdError("token id " + std::to_string(v) + " outside vocabulary");
  }
  check_context(context);
  const ContextTable* entry = lookup(j, context);
  if (entry == nullptr || entry->total == 0) {
    return 1.0 / static_cast<double>(vocab_size_);
  }
  const double denom = static_cast<double>(entry->total) + k_ * static_cast<double>(vocab_size_);
  const auto it = entry->counts.find(v);
  const double c = it == entry->counts.end() ? 0.0 : static_cast<double>(it->second);
  return (c + k_) / denom;
}

double NgramLM::prob(std::span<const TokenId> context, TokenId v) const {
  double p = 0.0;
  for (std::size_t j = 1; j <= order_; ++j) {
    p += lambdas_[j - 1] * order_prob(j, context, v);
  }
  return p;
}

std::vector<std::vector<CountTriple>> NgramLM::count_triples() const {
  std::vector<std::vector<CountTriple>> out(order_);
  for (std::size_t j = 0; j < order_; ++j) {
    for (const auto& [ctx, entry] : tables_[j]) {
      for (const auto& [tok, n] : entry.counts) {
        out[j].push_back({ctx, tok, n});
      }
    }
  }
  return out;
}

TokenIdSeq example_sequence(const Example& ex, const Vocab& vocab) {
  TokenIdSeq seq{kBos};
  for (const TokenId id : encode(ex.prompt, vocab)) {
    seq.push_back(id);
  }
  seq.push_back(kSep);
  for (const TokenId id : encode(ex.generation, vocab)) {
    seq.push_back(id);
  }
  seq.push_back(kEos);
  return seq;
}

NgramLM train_lm(const ExampleSet& dataset, const Vocab& vocab, const NgramConfig& config,
                 Warnings* warnings) {
  std::vector<TokenIdSeq> seqs;
  seqs.reserve(dataset.examples.size());
  for (const auto& ex : dataset.examples) {
    seqs.push_back(example_sequence(ex, vocab));
  }
  return NgramLM(vocab.size(), config, seqs, warnings);
}

double sequence_log_prob(const NgramLM& lm, std::span<const TokenId> seq) {
  if (seq.empty()) {
    throw ParameterError("sequence_log_prob needs a non-empty sequence");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    total += std::log(lm.prob(seq.first(i), seq[i]));
  }
  return total;
}

}  // namespace prefguide
