// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "prefguide/data_synth.hpp"
#include "prefguide/error.hpp"
#include "prefguide/vocab.hpp"

namespace prefguide {

// Instrumentation for the per-step cost model: how many base-model
// distributions and classifier context encodings were computed.
struct OpCounters {
  std::uint64_t lm_calls = 0;
  std::uint64_t clf_context_encodings = 0;
};

struct NextTokenDistribution {
  std::vector<double> probs;
};

// One (context, token, count) record of the order-j table; context has j-1 ids.
struct CountTriple {
  TokenIdSeq context;
  TokenId token = 0;
  std::uint64_t count = 0;

  bool operator==(const CountTriple&) const = default;
};

struct NgramConfig {
  std::size_t order = 3;
  double k = 0.1;
  std::vector<double> lambdas = {0.1, 0.3, 0.6};
};

// Interpolated add-k n-gram model over token ids. Immutable once built.
//
//   p(v | ctx) = sum_j lambda_j * (c_j(ctx_j, v) + k) / (T_j(ctx_j) + k |V|)
//
// where ctx_j is the last j-1 tokens of ctx. A context never seen at order j
// (or one shorter than j-1 tokens) contributes the uniform term 1/|V| there.
class NgramLM {
 public:
  struct ContextTable {
    std::uint64_t total = 0;
    std::map<TokenId, std::uint64_t> counts;
  };
  using Table = std::map<TokenIdSeq, ContextTable>;

  // Accumulates counts over the given sequences. lambdas that do not sum to
  // one are normalized and a warning is recorded.
  NgramLM(std::size_t vocab_size, const NgramConfig& config,
          std::span<const TokenIdSeq> sequences, Warnings* warnings = nullptr);

  // Rebuilds a model from per-order count triples (checkpoint loading).
  static NgramLM from_counts(std::size_t vocab_size, const NgramConfig& config,
                             const std::vector<std::vector<CountTriple>>& triples);

  std::size_t order() const noexcept { return order_; }
  double k() const noexcept { return k_; }
  const std::vector<double>& lambdas() const noexcept { return lambdas_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  const Table& table(std::size_t j) const { return tables_.at(j - 1); }

  NextTokenDistribution next_token_dist(std::span<const TokenId> context,
                                        OpCounters* counters = nullptr) const;

  // Probability of one token; same arithmetic as next_token_dist.
  double prob(std::span<const TokenId> context, TokenId v) const;

  // The un-interpolated order-j estimate (c + k) / (T + k|V|).
  double order_prob(std::size_t j, std::span<const TokenId> context, TokenId v) const;

  // Sorted (context, token, count) triples, one vector per order.
  std::vector<std::vector<CountTriple>> count_triples() const;

 private:
  NgramLM(std::size_t vocab_size, const NgramConfig& config, Warnings* warnings);
  const ContextTable* lookup(std::size_t j, std::span<const TokenId> context) const;
  void check_context(std::span<const TokenId> context) const;

  std::size_t order_;
  double k_;
  std::vector<double> lambdas_;
  std::size_t vocab_size_;
  std::vector<Table> tables_;
};

// <bos> prompt <sep> generation <eos>
TokenIdSeq example_sequence(const Example& ex, const Vocab& vocab);

NgramLM train_lm(const ExampleSet& dataset, const Vocab& vocab, const NgramConfig& config = {},
                 Warnings* warnings = nullptr);

inline NextTokenDistribution next_token_dist(const NgramLM& lm, std::span<const TokenId> context,
                                             OpCounters* counters = nullptr) {
  return lm.next_token_dist(context, counters);
}

// Natural-log chain-rule probability of seq, the first token conditioned on
// the empty context.
double sequence_log_prob(const NgramLM& lm, std::span<const TokenId> seq);

}  // namespace prefguide
