// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "fixture.hpp"
#include "prefguide/error.hpp"
#include "prefguide/eval.hpp"

using namespace prefguide;
using prefguide::testing::small_world;

namespace {

PreferenceRequest req(std::initializer_list<PreferenceEntry> entries) { return {entries}; }

// Sentences of assorted lengths and word sizes for normalization pools.
std::vector<std::string> pool(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> words = {"a",     "tiny",     "cat",   "walked", "along",
                                                 "river", "whimsical", "stone", "awful",  "extraordinarily"};
  Rng rng(seed);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s;
    const auto len = 1 + uniform_index(rng, 20);
    for (std::size_t w = 0; w < len; ++w) {
      if (w > 0) s += ' ';
      s += words[uniform_index(rng, words.size())];
    }
    out.push_back(s + " .");
  }
  return out;
}

// Reference Pearson correlation via the two-pass textbook formula.
double reference_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("oracle scores on hand examples") {
  const Lexicons& lex = default_lexicons();
  CHECK(oracle_score("one two three .", "concise") == -4.0);
  CHECK(oracle_score("one two three .", "verbose") == 4.0);
  // Words: one(3) two(3) three(5); "." has no alphanumerics.
  CHECK(oracle_score("one two three .", "technical") == doctest::Approx(11.0 / 3.0));
  CHECK(oracle_score("one two three .", "simple") == doctest::Approx(-11.0 / 3.0));
  CHECK(oracle_score("", "verbose") == 0.0);
  CHECK(oracle_score("", "technical") == 0.0);
  CHECK(oracle_score("", "playful") == 0.0);
  CHECK(oracle_score(". , !", "technical") == 0.0);
  const std::string p = lex.playful.front();
  CHECK(oracle_score(p + " cat " + p + " dog", "playful") == doctest::Approx(0.5));
  const std::string h = lex.harsh.front();
  CHECK(oracle_score("the " + h + " one", "harsh") == doctest::Approx(1.0 / 3.0));
  CHECK(oracle_score("the " + h + " one", "playful") == 0.0);
  CHECK_THROWS_AS(oracle_score("x", "formal"), UnknownDimensionError);
  CHECK(oracle_scores("a b", default_registry()).size() == 6);
}

TEST_CASE("judge needs a pool of at least 30 texts") {
  CHECK_THROWS_AS(Judge(pool(29, 1), default_registry()), ParameterError);
  CHECK_NOTHROW(Judge(pool(30, 1), default_registry()));
  CHECK_THROWS_AS(Judge(pool(30, 1), default_registry(), -1.0), ParameterError);
}

TEST_CASE("judge is reflexive and antisymmetric") {
  const Judge j(pool(100, 2), default_registry());
  const auto texts = pool(1000, 3);
  const std::vector<PreferenceRequest> requests = {req({{"verbose", 1}}), req({{"simple", 1}}),
                                                   req({{"playful", 1}, {"concise", 1}}),
                                                   req({{"harsh", 1}, {"technical", 1}, {"verbose", 1}})};
  for (std::size_t i = 0; i + 1 < texts.size(); ++i) {
    const auto& r = requests[i % requests.size()];
    CHECK(j.judge(texts[i], texts[i], r) == Verdict::kTie);
    const auto ab = j.judge(texts[i], texts[i + 1], r);
    const auto ba = j.judge(texts[i + 1], texts[i], r);
    if (ab == Verdict::kTie) {
      CHECK(ba == Verdict::kTie);
    } else {
      CHECK(ba != Verdict::kTie);
      CHECK(ba != ab);
    }
  }
}

TEST_CASE("judge prefers the longer text for verbose and the shorter for concise") {
  std::string short_text = "a b c .";
  std::string long_text;
  for (int i = 0; i < 30; ++i) long_text += "word ";
  const auto p = pool(60, 4);
  CHECK(judge(long_text, short_text, req({{"verbose", 1}}), p) == Verdict::kA);
  CHECK(judge(long_text, short_text, req({{"concise", 1}}), p) == Verdict::kB);
  CHECK(judge(short_text, short_text, req({{"concise", 1}}), p) == Verdict::kTie);
}

TEST_CASE("judge z-normalizes with the pool statistics") {
  const auto p = pool(50, 5);
  const Judge j(p, default_registry(), 0.0);
  double mean = 0.0;
  for (const auto& t : p) mean += oracle_score(t, "verbose");
  mean /= 50.0;
  double var = 0.0;
  for (const auto& t : p) var += std::pow(oracle_score(t, "verbose") - mean, 2);
  const double sd = std::sqrt(var / 50.0);
  CHECK(j.mean()[3] == doctest::Approx(mean));
  CHECK(j.stddev()[3] == doctest::Approx(sd));
  const std::size_t dims[] = {3};
  CHECK(j.composite("a b c", dims) == doctest::Approx((3.0 - mean) / sd));
  const std::size_t two[] = {2, 3};
  // concise and verbose cancel exactly.
  CHECK(std::abs(j.composite("a b c", two)) <= 1e-12);
}

TEST_CASE("a dimension with zero spread in the pool is flagged and ignored") {
  // No playful words anywhere: the playful column is constant.
  std::vector<std::string> flat;
  for (int i = 0; i < 40; ++i) {
    std::string t = "y";
    for (int k = 0; k <= i % 5; ++k) t += " xx";
    flat.push_back(t);
  }
  const Judge j(flat, default_registry());
  CHECK(j.flagged()[4]);
  CHECK_FALSE(j.flagged()[3]);
  const std::string p = default_lexicons().playful.front();
  CHECK(j.judge(p + " " + p, "x y", req({{"playful", 1}})) == Verdict::kTie);

  const std::vector<std::string> sys(40, p + " y"), base(40, "x y");
  const auto report = win_rate_from_texts(sys, base, req({{"playful", 1}}), j);
  CHECK(report.flagged_dims == std::vector<std::string>{"playful"});
  CHECK(report.win_rate() == 0.5);
}

TEST_CASE("win rate counts ties as half") {
  CHECK(WinCounts{3, 2, 5}.win_rate() == doctest::Approx(0.4));
  CHECK(WinCounts{}.win_rate() == 0.0);
  CHECK(WinCounts{1, 0, 0}.win_rate() == 1.0);
}

TEST_CASE("a system judged against itself scores one half; swapping mirrors the rate") {
  const auto prompts = pool(40, 6);
  const Generator same = [](const std::string& p, std::size_t) { return p; };
  const Generator longer = [](const std::string& p, std::size_t i) {
    return i % 3 == 0 ? p : p + " and more words here";
  };
  const auto r = req({{"verbose", 1}});
  const auto norm = pool(60, 7);
  CHECK(win_rate(same, same, prompts, r, default_registry(), kDefaultTau, &norm).win_rate() == 0.5);
  const auto ab = win_rate(longer, same, prompts, r, default_registry(), kDefaultTau, &norm);
  const auto ba = win_rate(same, longer, prompts, r, default_registry(), kDefaultTau, &norm);
  CHECK(ab.win_rate() + ba.win_rate() == doctest::Approx(1.0));
  CHECK(ab.overall.wins == ba.overall.losses);
  CHECK(ab.prompt_count == 40);
  CHECK(ab.per_dim.size() == 1);
  CHECK(ab.win_rate() > 0.5);
  CHECK_THROWS_AS(win_rate(same, same, {}, r), ParameterError);
}

TEST_CASE("correlation matrix structure") {
  const auto texts = pool(300, 8);
  const auto m = correlation_matrix(texts);
  REQUIRE(m.dims.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      if (!m.is_defined(i, j)) continue;
      CHECK(m.at(i, j) == m.at(j, i));
      CHECK(std::abs(m.at(i, j)) <= 1.0);
    }
  }
  for (std::size_t i = 0; i < 4; ++i) CHECK(m.at(i, i) == 1.0);
  // concise/verbose and simple/technical are exact negatives.
  CHECK(std::abs(m.at(0, 1) + 1.0) <= 1e-12);
  CHECK(std::abs(m.at(2, 3) + 1.0) <= 1e-12);

  std::vector<double> len, wl;
  for (const auto& t : texts) {
    len.push_back(oracle_score(t, "verbose"));
    wl.push_back(oracle_score(t, "technical"));
  }
  CHECK(m.at(3, 1) == doctest::Approx(reference_pearson(len, wl)).epsilon(1e-12));
}

TEST_CASE("constant columns are undefined and rendered as NA") {
  const std::vector<std::string> texts = {"a b", "a b c", "a b c d"};
  const auto m = correlation_matrix(texts);
  CHECK_FALSE(m.is_defined(4, 4));
  CHECK_FALSE(m.is_defined(4, 0));
  CHECK(m.is_defined(2, 3));
  CHECK(m.to_csv().find("NA") != std::string::npos);
  CHECK(m.to_csv().rfind("dim,simple,technical,concise,verbose,playful,harsh\n", 0) == 0);
  CHECK_THROWS_AS(correlation_matrix({"a", "b"}), ParameterError);
}

TEST_CASE("pearson edge cases") {
  const std::vector<double> x = {1, 2, 3, 4};
  const std::vector<double> y = {2, 4, 6, 8};
  const std::vector<double> z = {4, 3, 2, 1};
  const std::vector<double> c = {5, 5, 5, 5};
  CHECK(pearson(x, y) == doctest::Approx(1.0));
  CHECK(pearson(x, z) == doctest::Approx(-1.0));
  CHECK(std::isnan(pearson(x, c)));
  CHECK(std::isnan(pearson(std::vector<double>{1.0}, std::vector<double>{2.0})));
}

TEST_CASE("alpha grids") {
  CHECK(default_single_grid().size() == 5);
  CHECK(product_grid(default_multi_values(), 2).size() == 4);
  CHECK(product_grid(default_multi_values(), 3).size() == 8);
  const auto g = product_grid({0.5, 0.8}, 2);
  CHECK(g.front() == AlphaTuple{0.5, 0.5});
  CHECK(g.back() == AlphaTuple{0.8, 0.8});
  CHECK(product_grid({1.0}, 0).size() == 1);
  CHECK_THROWS_AS(make_request({"simple"}, {0.1, 0.2}), ParameterError);
}

TEST_CASE("sweep reports every tuple and breaks ties toward the smallest") {
  // A constant classifier with greedy decoding cannot change any output,
  // so every tuple ties at one half.
  const auto& w = small_world();
  const auto flat = zero_classifier(default_registry(), w.vocab.size(), {});
  std::array<std::vector<std::string>, 2> subsets;
  for (std::size_t i = 0; i < 60; ++i) {
    subsets[i % 2].push_back(w.corpus.eval.examples[i].prompt);
  }
  DecodeConfig cfg{.strategy = Strategy::kGreedy, .max_tokens = 12};
  const auto grid = product_grid({0.8, 0.5}, 2);
  const auto r = sweep_alpha(grid, {"concise", "playful"}, subsets, w.lm, flat, w.vocab, cfg);
  REQUIRE(r.rows.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r.rows[i].alphas == grid[i]);
    CHECK(r.rows[i].average == 0.5);
  }
  CHECK(r.selected == AlphaTuple{0.5, 0.5});

  const auto single = sweep_alpha({{0.3}}, {"concise"}, subsets, w.lm, flat, w.vocab, cfg);
  CHECK(single.selected == AlphaTuple{0.3});
  CHECK_THROWS_AS(sweep_alpha({}, {"concise"}, subsets, w.lm, flat, w.vocab, cfg), ParameterError);
}

TEST_CASE("sweep with a trained classifier is reproducible") {
  const auto& w = small_world();
  std::array<std::vector<std::string>, 2> subsets;
  for (std::size_t i = 0; i < 60; ++i) subsets[i % 2].push_back(w.corpus.eval.examples[i].prompt);
  const DecodeConfig cfg{.max_tokens = 16, .seed = 3};
  const auto a = sweep_alpha(default_single_grid(), {"verbose"}, subsets, w.lm, w.clf, w.vocab, cfg);
  const auto b = sweep_alpha(default_single_grid(), {"verbose"}, subsets, w.lm, w.clf, w.vocab, cfg);
  CHECK(to_json(a).dump() == to_json(b).dump());
  for (const auto& row : a.rows) {
    CHECK(row.average == doctest::Approx(0.5 * (row.subset_win_rate[0] + row.subset_win_rate[1])));
  }
}
