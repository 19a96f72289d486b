// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefguide/classifier.hpp"
#include "prefguide/ngram_lm.hpp"
#include "prefguide/vocab.hpp"

namespace prefguide {

struct PreferenceEntry {
  std::string dim;
  double alpha = 0.0;

  bool operator==(const PreferenceEntry&) const = default;
};

// The user's chosen dimensions and their guidance weights.
struct PreferenceRequest {
  std::vector<PreferenceEntry> entries;

  bool empty() const noexcept { return entries.empty(); }
};

// Registry column and weight per entry, sorted by column.
struct ResolvedRequest {
  std::vector<std::size_t> dims;
  std::vector<double> alphas;

  bool is_identity() const;
};

// Validates a request: known dims (UnknownDimensionError), distinct dims,
// finite non-negative weights, and at most one member of any opposing pair
// unless allow_opposites is set (ParameterError).
ResolvedRequest resolve_request(const PreferenceRequest& req, const PreferenceRegistry& registry,
                                bool allow_opposites = false);

enum class Strategy { kGreedy, kTemperature, kTopK };

std::string_view strategy_name(Strategy s);
Strategy parse_strategy(std::string_view name);

struct DecodeConfig {
  Strategy strategy = Strategy::kTopK;
  double temperature = 1.0;
  std::size_t top_k = 10;
  std::size_t max_tokens = 48;
  std::uint64_t seed = 0;
  bool trace = false;
  // Score candidates with one classifier pass per vocabulary entry instead
  // of the single-pass class matrix.
  bool naive_classifier = false;
  bool allow_opposites = false;
};

struct StepTrace {
  std::vector<double> base_dist;
  std::vector<std::vector<double>> class_columns;  // one per requested dim, registry order
  std::vector<std::string> class_dims;
  std::vector<double> combined_dist;
  TokenId chosen = 0;
  OpCounters counters;
};

enum class StopReason { kEos, kMaxTokens };
std::string_view stop_reason_name(StopReason r);

struct GenerationResult {
  TokenIdSeq tokens;  // includes the terminal <eos> when one was emitted
  std::string text;   // decoded tokens without the terminal <eos>
  StopReason stop_reason = StopReason::kMaxTokens;
  bool traced = false;
  std::vector<StepTrace> steps;           // populated when traced
  std::vector<OpCounters> step_counters;  // always populated
};

// Guided next-token distribution: softmax over v of
//   log p_base(v | ctx) + sum_k alpha_k log M[v, c_k]
// with M from one class_matrix call. An empty or all-zero request returns
// the base distribution unchanged. ctx must start with <bos> and contain <sep>.
NextTokenDistribution guided_step(const NgramLM& lm, const ClassifierModel& clf,
                                  std::span<const TokenId> ctx, const PreferenceRequest& req,
                                  OpCounters* counters = nullptr, bool allow_opposites = false);

// Same contract, classifying every candidate continuation separately.
NextTokenDistribution naive_guided_step(const NgramLM& lm, const ClassifierModel& clf,
                                        std::span<const TokenId> ctx, const PreferenceRequest& req,
                                        OpCounters* counters = nullptr,
                                        bool allow_opposites = false);

// Combines a base distribution with classifier columns in log space.
std::vector<double> combine_log_space(std::span<const double> base,
                                      std::span<const std::span<const double>> columns,
                                      std::span<const double> alphas);

// <bos> encode(prompt) <sep>
TokenIdSeq prompt_context(std::string_view prompt, const Vocab& vocab);

// Picks a token from dist according to the strategy; rng is advanced for
// the sampling strategies only.
TokenId choose_token(std::span<const double> dist, const DecodeConfig& cfg, Rng& rng);

GenerationResult generate(const NgramLM& lm, const ClassifierModel& clf, std::string_view prompt,
                          const PreferenceRequest& req, const DecodeConfig& cfg, const Vocab& vocab);

// Per-step (lm_calls, clf_context_encodings). Throws MissingTraceError when
// the result was produced without tracing.
std::vector<OpCounters> count_forward_passes(const GenerationResult& result);

}  // namespace prefguide
