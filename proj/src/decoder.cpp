// SPDX-License-Identifier: Apache-2.0
#include "prefguide/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace prefguide {

namespace {

void check_guided_context(std::span<const TokenId> ctx) {
  if (ctx.empty() || ctx.front() != kBos ||
      std::find(ctx.begin(), ctx.end(), kSep) == ctx.end()) {
    throw ParameterError("guided context must start with <bos> and contain <sep>");
  }
}

// Column c of the classifier matrix as a contiguous vector.
std::vector<double> column(const ClassMatrix& m, std::size_t c) {
  std::vector<double> col(m.rows);
  for (std::size_t v = 0; v < m.rows; ++v) {
    col[v] = m.at(v, c);
  }
  return col;
}

struct StepParts {
  NextTokenDistribution base;
  std::vector<std::vector<double>> columns;  // resolved order
  NextTokenDistribution combined;
};

// Base distribution, requested classifier columns and their combination for
// one decoding step. The identity request skips the classifier entirely.
StepParts compute_step(const NgramLM& lm, const ClassifierModel& clf,
                       std::span<const TokenId> ctx, const ResolvedRequest& resolved, bool naive,
                       OpCounters* counters) {
  StepParts parts;
  parts.base = lm.next_token_dist(ctx, counters);
  if (resolved.is_identity()) {
    parts.combined = parts.base;
    return parts;
  }
  const std::size_t n = lm.vocab_size();
  if (naive) {
    parts.columns.assign(resolved.dims.size(), std::vector<double>(n));
    TokenIdSeq extended(ctx.begin(), ctx.end());
    extended.push_back(0);
    for (TokenId v = 0; v < n; ++v) {
      extended.back() = v;
      const auto post = clf.class_posterior(extended, counters);
      for (std::size_t k = 0; k < resolved.dims.size(); ++k) {
        parts.columns[k][v] = post[resolved.dims[k]];
      }
    }
  } else {
    const ClassMatrix m = clf.class_matrix(ctx, counters);
    for (const auto c : resolved.dims) {
      parts.columns.push_back(column(m, c));
    }
  }
  std::vector<std::span<const double>> spans(parts.columns.begin(), parts.columns.end());
  parts.combined = {combine_log_space(parts.base.probs, spans, resolved.alphas)};
  return parts;
}

}  // namespace

bool ResolvedRequest::is_identity() const {
  return std::all_of(alphas.begin(), alphas.end(), [](double a) { return a == 0.0; });
}

ResolvedRequest resolve_request(const PreferenceRequest& req, const PreferenceRegistry& registry,
                                bool allow_opposites) {
  std::vector<std::pair<std::size_t, double>> items;
  std::set<std::size_t> seen;
  std::set<int> pairs;
  for (const auto& e : req.entries) {
    const std::size_t idx = registry.index_of(e.dim);
    if (!std::isfinite(e.alpha) || e.alpha < 0.0) {
      throw ParameterError("weight for " + e.dim + " must be finite and >= 0");
    }
    if (!seen.insert(idx).second) {
      throw ParameterError("dimension requested twice: " + e.dim);
    }
    if (!pairs.insert(registry.at(idx).pair_id).second && !allow_opposites) {
      throw ParameterError("opposing dimensions requested together: " + e.dim + " and " +
                           registry.at(registry.opposite_of(idx)).symbol);
    }
    items.emplace_back(idx, e.alpha);
  }
  std::sort(items.begin(), items.end());
  ResolvedRequest r;
  for (const auto& [idx, alpha] : items) {
    r.dims.push_back(idx);
    r.alphas.push_back(alpha);
  }
  return r;
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kGreedy:
      return "greedy";
    case Strategy::kTemperature:
      return "temperature";
    case Strategy::kTopK:
      return "top_k";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "greedy") return Strategy::kGreedy;
  if (name == "temperature") return Strategy::kTemperature;
  if (name == "top_k") return Strategy::kTopK;
  throw ParameterError("unknown decoding strategy: " + std::string(name));
}

std::string_view stop_reason_name(StopReason r) {
  return r == StopReason::kEos ? "eos" : "max_tokens";
}

std::vector<double> combine_log_space(std::span<const double> base,
                                      std::span<const std::span<const double>> columns,
                                      std::span<const double> alphas) {
  const std::size_t n = base.size();
  std::vector<double> s(n);
  for (std::size_t v = 0; v < n; ++v) {
    double score = std::log(base[v]);
    for (std::size_t k = 0; k < columns.size(); ++k) {
      score += alphas[k] * std::log(columns[k][v]);
    }
    if (!std::isfinite(score)) {
      throw Error("non-finite guided score for token " + std::to_string(v));
    }
    s[v] = score;
  }
  return softmax(s);
}

NextTokenDistribution guided_step(const NgramLM& lm, const ClassifierModel& clf,
                                  std::span<const TokenId> ctx, const PreferenceRequest& req,
                                  OpCounters* counters, bool allow_opposites) {
  check_guided_context(ctx);
  const auto resolved = resolve_request(req, clf.registry(), allow_opposites);
  return compute_step(lm, clf, ctx, resolved, false, counters).combined;
}

NextTokenDistribution naive_guided_step(const NgramLM& lm, const ClassifierModel& clf,
                                        std::span<const TokenId> ctx, const PreferenceRequest& req,
                                        OpCounters* counters, bool allow_opposites) {
  check_guided_context(ctx);
  const auto resolved = resolve_request(req, clf.registry(), allow_opposites);
  return compute_step(lm, clf, ctx, resolved, true, counters).combined;
}

TokenIdSeq prompt_context(std::string_view prompt, const Vocab& vocab) {
  TokenIdSeq ctx{kBos};
  const auto ids = encode(prompt, vocab);
  ctx.insert(ctx.end(), ids.begin(), ids.end());
  ctx.push_back(kSep);
  return ctx;
}

TokenId choose_token(std::span<const double> dist, const DecodeConfig& cfg, Rng& rng) {
  const std::size_t n = dist.size();
  if (cfg.strategy == Strategy::kGreedy) {
    // max_element returns the first maximum: lowest id wins ties.
    return static_cast<TokenId>(std::distance(dist.begin(), std::max_element(dist.begin(), dist.end())));
  }
  if (!(cfg.temperature > 0.0) || !std::isfinite(cfg.temperature)) {
    throw ParameterError("temperature must be > 0");
  }
  std::vector<double> q(dist.begin(), dist.end());
  if (cfg.temperature != 1.0) {
    std::vector<double> logits(n);
    for (std::size_t v = 0; v < n; ++v) {
      logits[v] = std::log(dist[v]) / cfg.temperature;
    }
    q = softmax(logits);
  }
  std::vector<TokenId> candidates(n);
  std::iota(candidates.begin(), candidates.end(), 0);
  if (cfg.strategy == Strategy::kTopK) {
    if (cfg.top_k == 0) {
      throw ParameterError("top_k must be >= 1");
    }
    const std::size_t k = std::min(cfg.top_k, n);
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                      candidates.end(), [&](TokenId a, TokenId b) {
                        return q[a] > q[b] || (q[a] == q[b] && a < b);
                      });
    candidates.resize(k);
    std::sort(candidates.begin(), candidates.end());
  }
  double total = 0.0;
  for (const auto v : candidates) {
    total += q[v];
  }
  const double u = uniform01(rng) * total;
  double cum = 0.0;
  for (const auto v : candidates) {
    cum += q[v];
    if (u < cum) {
      return v;
    }
  }
  // Rounding left u at the very top of the mass: take the last supported token.
  for (auto it = candidates.rbegin(); it != candidates.rend(); ++it) {
    if (q[*it] > 0.0) {
      return *it;
    }
  }
  return candidates.back();
}

GenerationResult generate(const NgramLM& lm, const ClassifierModel& clf, std::string_view prompt,
                          const PreferenceRequest& req, const DecodeConfig& cfg, const Vocab& vocab) {
  if (cfg.max_tokens == 0) {
    throw ParameterError("max_tokens must be >= 1");
  }
  if (lm.vocab_size() != vocab.size() || clf.vocab_size() != vocab.size()) {
    throw ParameterError("model vocabulary sizes do not match the tokenizer");
  }
  const auto resolved = resolve_request(req, clf.registry(), cfg.allow_opposites);
  TokenIdSeq ctx = prompt_context(prompt, vocab);
  Rng rng(cfg.seed);

  GenerationResult result;
  result.traced = cfg.trace;
  while (result.tokens.size() < cfg.max_tokens) {
    OpCounters counters;
    StepParts parts = compute_step(lm, clf, ctx, resolved, cfg.naive_classifier, &counters);
    const TokenId chosen = choose_token(parts.combined.probs, cfg, rng);
    result.tokens.push_back(chosen);
    result.step_counters.push_back(counters);
    if (cfg.trace) {
      StepTrace step;
      step.base_dist = std::move(parts.base.probs);
      step.class_columns = std::move(parts.columns);
      if (!resolved.is_identity()) {
        for (const auto c : resolved.dims) {
          step.class_dims.push_back(clf.registry().at(c).symbol);
        }
      }
      step.combined_dist = std::move(parts.combined.probs);
      step.chosen = chosen;
      step.counters = counters;
      result.steps.push_back(std::move(step));
    }
    if (chosen == kEos) {
      result.stop_reason = StopReason::kEos;
      break;
    }
    ctx.push_back(chosen);
  }
  std::span<const TokenId> visible(result.tokens);
  if (result.stop_reason == StopReason::kEos) {
    visible = visible.first(visible.size() - 1);
  }
  result.text = decode(visible, vocab);
  return result;
}

std::vector<OpCounters> count_forward_passes(const GenerationResult& result) {
  if (!result.traced) {
    throw MissingTraceError("generation was run without tracing");
  }
  std::vector<OpCounters> out;
  out.reserve(result.steps.size());
  for (const auto& s : result.steps) {
    out.push_back(s.counters);
  }
  return out;
}

}  // namespace prefguide
