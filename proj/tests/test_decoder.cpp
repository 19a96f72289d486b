// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixture.hpp"
#include "prefguide/decoder.hpp"
#include "prefguide/error.hpp"

using namespace prefguide;
using prefguide::testing::make_vocab;
using prefguide::testing::random_classifier;
using prefguide::testing::random_context;
using prefguide::testing::small_world;

namespace {

PreferenceRequest req(std::initializer_list<PreferenceEntry> entries) { return {entries}; }

double expected_under(const std::vector<double>& dist, const std::vector<double>& values) {
  double s = 0.0;
  for (std::size_t v = 0; v < dist.size(); ++v) s += dist[v] * values[v];
  return s;
}

std::vector<double> class_column(const ClassifierModel& clf, const TokenIdSeq& ctx, std::size_t c) {
  const auto m = clf.class_matrix(ctx);
  std::vector<double> col(m.rows);
  for (std::size_t v = 0; v < m.rows; ++v) col[v] = m.at(v, c);
  return col;
}

std::vector<double> log_of(std::vector<double> xs) {
  for (auto& x : xs) x = std::log(x);
  return xs;
}

}  // namespace

TEST_CASE("zero weights return the base distribution bitwise") {
  const auto& w = small_world();
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ctx = random_context(rng, w.vocab.size());
    const auto base = w.lm.next_token_dist(ctx).probs;
    CHECK(guided_step(w.lm, w.clf, ctx, {}).probs == base);
    CHECK(guided_step(w.lm, w.clf, ctx, req({{"concise", 0.0}})).probs == base);
    CHECK(guided_step(w.lm, w.clf, ctx, req({{"concise", 0.0}, {"harsh", 0.0}})).probs == base);
    OpCounters c;
    guided_step(w.lm, w.clf, ctx, req({{"simple", 0.0}}), &c);
    CHECK(c.clf_context_encodings == 0);
    CHECK(c.lm_calls == 1);
  }
}

TEST_CASE("a constant classifier leaves the base distribution unchanged") {
  const auto& w = small_world();
  const auto flat = zero_classifier(default_registry(), w.vocab.size(), {});
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto ctx = random_context(rng, w.vocab.size());
    const auto base = w.lm.next_token_dist(ctx).probs;
    const auto g = guided_step(w.lm, flat, ctx, req({{"verbose", 1.7}, {"playful", 0.4}})).probs;
    for (std::size_t v = 0; v < base.size(); ++v) CHECK(std::abs(g[v] - base[v]) <= 1e-12);
  }
}

TEST_CASE("log-space combination on a hand example") {
  // p = (0.9, 0.1), M = (0.1, 0.9), alpha = 1: scores 0.09 and 0.09.
  const std::vector<double> base = {0.9, 0.1};
  const std::vector<double> col = {0.1, 0.9};
  const std::vector<std::span<const double>> cols = {col};
  const std::vector<double> one = {1.0};
  const auto p = combine_log_space(base, cols, one);
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-14));

  // alpha = 2: 0.9 * 0.01 vs 0.1 * 0.81.
  const std::vector<double> two = {2.0};
  const auto q = combine_log_space(base, cols, two);
  CHECK(q[1] == doctest::Approx(0.081 / (0.081 + 0.009)).epsilon(1e-14));

  // Two columns multiply.
  const std::vector<double> col2 = {0.5, 0.25};
  const std::vector<std::span<const double>> both = {col, col2};
  const std::vector<double> alphas = {1.0, 1.0};
  const auto r = combine_log_space(base, both, alphas);
  CHECK(r[0] == doctest::Approx(0.045 / (0.045 + 0.0225)).epsilon(1e-14));

  const std::vector<double> zero_base = {1.0, 0.0};
  CHECK_THROWS_AS(combine_log_space(zero_base, cols, one), Error);
}

TEST_CASE("single-pass and per-candidate guidance agree") {
  const auto& w = small_world();
  Rng rng(3);
  const std::vector<PreferenceRequest> requests = {
      req({{"concise", 0.8}}), req({{"technical", 0.3}, {"playful", 1.2}}),
      req({{"simple", 0.5}, {"verbose", 0.5}, {"harsh", 2.0}})};
  for (int trial = 0; trial < 15; ++trial) {
    const auto ctx = random_context(rng, w.vocab.size());
    for (const auto& r : requests) {
      OpCounters fast_c, slow_c;
      const auto fast = guided_step(w.lm, w.clf, ctx, r, &fast_c).probs;
      const auto slow = naive_guided_step(w.lm, w.clf, ctx, r, &slow_c).probs;
      for (std::size_t v = 0; v < fast.size(); ++v) CHECK(std::abs(fast[v] - slow[v]) <= 1e-9);
      CHECK(fast_c.lm_calls == 1);
      CHECK(fast_c.clf_context_encodings == 1);
      CHECK(slow_c.lm_calls == 1);
      CHECK(slow_c.clf_context_encodings == w.vocab.size());
    }
  }
}

TEST_CASE("guided distribution sums to one") {
  const auto& w = small_world();
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto ctx = random_context(rng, w.vocab.size());
    const auto p = guided_step(w.lm, w.clf, ctx, req({{"verbose", 3.0}, {"technical", 0.2}})).probs;
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-9);
  }
}

TEST_CASE("raising a weight raises the expected log class probability") {
  const auto& w = small_world();
  const auto& reg = default_registry();
  const std::vector<double> grid = {0.0, 0.25, 0.5, 1.0, 2.0, 4.0};
  Rng rng(5);
  for (int trial = 0; trial < 8; ++trial) {
    const auto ctx = random_context(rng, w.vocab.size());
    for (std::size_t c = 0; c < reg.size(); ++c) {
      const auto col = log_of(class_column(w.clf, ctx, c));
      double prev = -HUGE_VAL;
      for (const double a : grid) {
        const auto p = guided_step(w.lm, w.clf, ctx, req({{reg.at(c).symbol, a}})).probs;
        const double e = expected_under(p, col);
        CHECK(e >= prev - 1e-9);
        prev = e;
      }
    }
  }
}

TEST_CASE("large weights concentrate mass on the class argmax") {
  const auto m = random_classifier(12, 9, 2.0);
  const std::vector<TokenIdSeq> seqs = {{0, 5, 6, 2, 7, 8, 1}};
  const NgramLM lm(12, NgramConfig{}, seqs);
  const TokenIdSeq ctx = {kBos, 5, kSep, 7};
  const auto col = class_column(m, ctx, 2);
  const auto best = std::distance(col.begin(), std::max_element(col.begin(), col.end()));
  const auto p = guided_step(lm, m, ctx, req({{"concise", 200.0}})).probs;
  CHECK(std::distance(p.begin(), std::max_element(p.begin(), p.end())) == best);
  CHECK(p[static_cast<std::size_t>(best)] > 0.99);
}

TEST_CASE("request validation") {
  const auto& reg = default_registry();
  CHECK_THROWS_AS(resolve_request(req({{"formal", 1.0}}), reg), UnknownDimensionError);
  CHECK_THROWS_AS(resolve_request(req({{"simple", -0.1}}), reg), ParameterError);
  CHECK_THROWS_AS(resolve_request(req({{"simple", std::nan("")}}), reg), ParameterError);
  CHECK_THROWS_AS(resolve_request(req({{"simple", HUGE_VAL}}), reg), ParameterError);
  CHECK_THROWS_AS(resolve_request(req({{"simple", 1.0}, {"simple", 2.0}}), reg), ParameterError);
  CHECK_THROWS_AS(resolve_request(req({{"concise", 1.0}, {"verbose", 1.0}}), reg), ParameterError);
  CHECK_NOTHROW(resolve_request(req({{"concise", 1.0}, {"verbose", 1.0}}), reg, true));

  const auto r = resolve_request(req({{"harsh", 0.3}, {"simple", 0.7}}), reg);
  CHECK(r.dims == std::vector<std::size_t>{0, 5});
  CHECK(r.alphas == std::vector<double>{0.7, 0.3});
  CHECK_FALSE(r.is_identity());
  CHECK(resolve_request({}, reg).is_identity());
}

TEST_CASE("entry order does not change the distribution") {
  const auto& w = small_world();
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto ctx = random_context(rng, w.vocab.size());
    const auto a = guided_step(w.lm, w.clf, ctx, req({{"harsh", 0.3}, {"simple", 0.7}, {"concise", 1.1}}));
    const auto b = guided_step(w.lm, w.clf, ctx, req({{"concise", 1.1}, {"simple", 0.7}, {"harsh", 0.3}}));
    CHECK(a.probs == b.probs);
  }
}

TEST_CASE("guided contexts must be framed") {
  const auto& w = small_world();
  CHECK_THROWS_AS(guided_step(w.lm, w.clf, TokenIdSeq{}, {}), ParameterError);
  CHECK_THROWS_AS(guided_step(w.lm, w.clf, TokenIdSeq{kBos, 5}, {}), ParameterError);
  CHECK_THROWS_AS(guided_step(w.lm, w.clf, TokenIdSeq{5, kSep}, {}), ParameterError);
}

TEST_CASE("strategy names") {
  for (const auto s : {Strategy::kGreedy, Strategy::kTemperature, Strategy::kTopK}) {
    CHECK(parse_strategy(strategy_name(s)) == s);
  }
  CHECK_THROWS_AS(parse_strategy("beam"), ParameterError);
}

TEST_CASE("token choice") {
  Rng rng(7);
  DecodeConfig greedy{.strategy = Strategy::kGreedy};
  const std::vector<double> tie = {0.1, 0.4, 0.4, 0.1};
  CHECK(choose_token(tie, greedy, rng) == 1);

  // top_k = 1 is greedy, with the same tie rule.
  DecodeConfig top1{.strategy = Strategy::kTopK, .top_k = 1};
  for (int i = 0; i < 20; ++i) CHECK(choose_token(tie, top1, rng) == 1);

  // top_k = 2 never picks outside the two largest.
  DecodeConfig top2{.strategy = Strategy::kTopK, .top_k = 2};
  const std::vector<double> dist = {0.05, 0.5, 0.05, 0.3, 0.1};
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 4000; ++i) ++hits[choose_token(dist, top2, rng)];
  CHECK(hits[0] + hits[2] + hits[4] == 0);
  CHECK(static_cast<double>(hits[1]) / 4000.0 == doctest::Approx(0.625).epsilon(0.05));

  // Plain sampling follows the distribution.
  DecodeConfig sample{.strategy = Strategy::kTemperature};
  std::fill(hits.begin(), hits.end(), 0);
  for (int i = 0; i < 20000; ++i) ++hits[choose_token(dist, sample, rng)];
  for (std::size_t v = 0; v < 5; ++v) {
    CHECK(static_cast<double>(hits[v]) / 20000.0 == doctest::Approx(dist[v]).epsilon(0.1));
  }

  // Greedy does not touch the generator.
  Rng a(99), b(99);
  choose_token(dist, greedy, a);
  CHECK(uniform01(a) == uniform01(b));

  CHECK_THROWS_AS(choose_token(dist, DecodeConfig{.strategy = Strategy::kTemperature, .temperature = 0.0}, rng),
                  ParameterError);
  CHECK_THROWS_AS(choose_token(dist, DecodeConfig{.strategy = Strategy::kTopK, .top_k = 0}, rng),
                  ParameterError);
}

TEST_CASE("generation is deterministic and traced consistently") {
  const auto& w = small_world();
  const auto r = req({{"verbose", 0.8}});
  DecodeConfig cfg;
  cfg.seed = 11;
  cfg.trace = true;
  const auto a = generate(w.lm, w.clf, "the river was quiet", r, cfg, w.vocab);
  const auto b = generate(w.lm, w.clf, "the river was quiet", r, cfg, w.vocab);
  CHECK(a.tokens == b.tokens);
  CHECK(a.text == b.text);
  REQUIRE(a.steps.size() == a.tokens.size());
  CHECK(a.step_counters.size() == a.tokens.size());
  CHECK(a.tokens.size() <= cfg.max_tokens);
  if (a.stop_reason == StopReason::kEos) {
    CHECK(a.tokens.back() == kEos);
  } else {
    CHECK(a.tokens.size() == cfg.max_tokens);
  }
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].chosen == a.tokens[i]);
    CHECK(a.steps[i].class_dims == std::vector<std::string>{"verbose"});
    CHECK(a.steps[i].class_columns.size() == 1);
    CHECK(a.steps[i].base_dist.size() == w.vocab.size());
  }
  const auto passes = count_forward_passes(a);
  for (const auto& p : passes) {
    CHECK(p.lm_calls == 1);
    CHECK(p.clf_context_encodings == 1);
  }

  cfg.trace = false;
  const auto plain = generate(w.lm, w.clf, "the river was quiet", r, cfg, w.vocab);
  CHECK(plain.tokens == a.tokens);
  CHECK(plain.steps.empty());
  CHECK_THROWS_AS(count_forward_passes(plain), MissingTraceError);

  cfg.max_tokens = 0;
  CHECK_THROWS_AS(generate(w.lm, w.clf, "x", r, cfg, w.vocab), ParameterError);
  cfg.max_tokens = 3;
  const auto short_run = generate(w.lm, w.clf, "x", {}, cfg, w.vocab);
  CHECK(short_run.tokens.size() <= 3);
}

TEST_CASE("per-step counters do not grow with the number of dimensions") {
  const auto& w = small_world();
  DecodeConfig cfg;
  cfg.trace = true;
  cfg.max_tokens = 10;
  for (const auto& r : {req({{"simple", 0.5}}), req({{"simple", 0.5}, {"verbose", 0.5}}),
                        req({{"simple", 0.5}, {"verbose", 0.5}, {"harsh", 0.5}})}) {
    const auto g = generate(w.lm, w.clf, "a quiet morning", r, cfg, w.vocab);
    for (const auto& p : count_forward_passes(g)) {
      CHECK(p.lm_calls == 1);
      CHECK(p.clf_context_encodings == 1);
    }
  }
  cfg.naive_classifier = true;
  const auto g = generate(w.lm, w.clf, "a quiet morning", req({{"simple", 0.5}}), cfg, w.vocab);
  for (const auto& p : count_forward_passes(g)) CHECK(p.clf_context_encodings == w.vocab.size());
}

TEST_CASE("guidance toward a class that favors <eos> shortens generations") {
  const auto& w = small_world();
  // Only feature: u:<eos>, pointing at the concise column (2).
  std::vector<double> weights(w.clf.num_classes(), 0.0);
  weights[2] = 3.0;
  const ClassifierModel clf(default_registry(), w.vocab.size(), {unigram_key(kEos)}, weights);
  DecodeConfig cfg;
  double base_len = 0.0, guided_len = 0.0;
  const std::size_t n = 200;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& prompt = w.corpus.eval.examples[i % w.corpus.eval.examples.size()].prompt;
    cfg.seed = i;
    base_len += static_cast<double>(generate(w.lm, clf, prompt, {}, cfg, w.vocab).tokens.size());
    guided_len += static_cast<double>(
        generate(w.lm, clf, prompt, req({{"concise", 0.8}}), cfg, w.vocab).tokens.size());
  }
  MESSAGE("mean length vanilla " << base_len / n << ", concise " << guided_len / n);
  CHECK(guided_len < base_len);
}

TEST_CASE("generation rejects mismatched vocabularies") {
  const auto& w = small_world();
  const Vocab other = make_vocab({"a"});
  CHECK_THROWS_AS(generate(w.lm, w.clf, "a", {}, DecodeConfig{}, other), ParameterError);
}
