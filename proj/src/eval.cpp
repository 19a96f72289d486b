// SPDX-License-Identifier: Apache-2.0
#include "prefguide/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace prefguide {

namespace {

bool has_alnum(const std::string& tok) {
  return std::any_of(tok.begin(), tok.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; });
}

double hit_rate(const std::vector<std::string>& tokens, const std::vector<std::string>& lexicon) {
  if (tokens.empty()) {
    return 0.0;
  }
  const std::set<std::string> terms(lexicon.begin(), lexicon.end());
  std::size_t hits = 0;
  for (const auto& t : tokens) {
    hits += terms.count(t);
  }
  return static_cast<double>(hits) / static_cast<double>(tokens.size());
}

double mean_word_length(const std::vector<std::string>& tokens) {
  std::size_t chars = 0;
  std::size_t words = 0;
  for (const auto& t : tokens) {
    if (has_alnum(t)) {
      chars += t.size();
      ++words;
    }
  }
  return words == 0 ? 0.0 : static_cast<double>(chars) / static_cast<double>(words);
}

std::vector<std::size_t> dims_of(const PreferenceRequest& req, const PreferenceRegistry& registry) {
  std::vector<std::size_t> dims;
  for (const auto& e : req.entries) {
    dims.push_back(registry.index_of(e.dim));
  }
  std::sort(dims.begin(), dims.end());
  return dims;
}

}  // namespace

double oracle_score(std::string_view text, std::string_view dim, const Lexicons& lex) {
  const auto tokens = normalize_tokens(text);
  const auto count = static_cast<double>(tokens.size());
  if (dim == "concise") return -count;
  if (dim == "verbose") return count;
  if (dim == "simple") return -mean_word_length(tokens);
  if (dim == "technical") return mean_word_length(tokens);
  if (dim == "playful") return hit_rate(tokens, lex.playful);
  if (dim == "harsh") return hit_rate(tokens, lex.harsh);
  throw UnknownDimensionError(std::string(dim));
}

std::vector<double> oracle_scores(std::string_view text, const PreferenceRegistry& registry,
                                  const Lexicons& lex) {
  std::vector<double> scores;
  scores.reserve(registry.size());
  for (const auto& d : registry.dims()) {
    scores.push_back(oracle_score(text, d.symbol, lex));
  }
  return scores;
}

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kA:
      return "A";
    case Verdict::kB:
      return "B";
    case Verdict::kTie:
      return "TIE";
  }
  return "?";
}

Judge::Judge(const std::vector<std::string>& norm_pool, const PreferenceRegistry& registry,
             double tau, const Lexicons& lex)
    : registry_(registry), lex_(&lex), tau_(tau) {
  if (norm_pool.size() < kMinNormPool) {
    throw ParameterError("judge normalization pool needs at least " + std::to_string(kMinNormPool) +
                         " texts, got " + std::to_string(norm_pool.size()));
  }
  if (!(tau >= 0.0) || !std::isfinite(tau)) {
    throw ParameterError("judge threshold must be finite and >= 0");
  }
  const std::size_t d = registry_.size();
  std::vector<std::vector<double>> scores;
  scores.reserve(norm_pool.size());
  for (const auto& t : norm_pool) {
    scores.push_back(oracle_scores(t, registry_, lex));
  }
  const auto n = static_cast<double>(norm_pool.size());
  mean_.assign(d, 0.0);
  stddev_.assign(d, 0.0);
  flagged_.assign(d, false);
  for (std::size_t c = 0; c < d; ++c) {
    double sum = 0.0;
    for (const auto& s : scores) {
      sum += s[c];
    }
    mean_[c] = sum / n;
    double ss = 0.0;
    for (const auto& s : scores) {
      ss += (s[c] - mean_[c]) * (s[c] - mean_[c]);
    }
    stddev_[c] = std::sqrt(ss / n);
    flagged_[c] = !(stddev_[c] > 0.0);
  }
}

double Judge::composite(std::string_view text, std::span<const std::size_t> dims) const {
  if (dims.empty()) {
    return 0.0;
  }
  double sum = 0.0;
  for (const auto c : dims) {
    if (flagged_[c]) {
      continue;
    }
    sum += (oracle_score(text, registry_.at(c).symbol, *lex_) - mean_[c]) / stddev_[c];
  }
  return sum / static_cast<double>(dims.size());
}

Verdict Judge::judge_dims(std::string_view a, std::string_view b,
                          std::span<const std::size_t> dims) const {
  const double diff = composite(a, dims) - composite(b, dims);
  if (diff > tau_) return Verdict::kA;
  if (diff < -tau_) return Verdict::kB;
  return Verdict::kTie;
}

Verdict Judge::judge(std::string_view a, std::string_view b, const PreferenceRequest& req) const {
  const auto dims = dims_of(req, registry_);
  return judge_dims(a, b, dims);
}

Verdict judge(std::string_view a, std::string_view b, const PreferenceRequest& req,
              const std::vector<std::string>& norm_pool, const PreferenceRegistry& registry,
              double tau) {
  return Judge(norm_pool, registry, tau).judge(a, b, req);
}

double WinCounts::win_rate() const {
  const std::size_t n = total();
  if (n == 0) {
    return 0.0;
  }
  // Integer numerator (2w + t) keeps the result independent of summation order.
  return static_cast<double>(2 * wins + ties) / static_cast<double>(2 * n);
}

WinRateReport win_rate_from_texts(const std::vector<std::string>& system_texts,
                                  const std::vector<std::string>& baseline_texts,
                                  const PreferenceRequest& req, const Judge& judge) {
  if (system_texts.size() != baseline_texts.size()) {
    throw ParameterError("system and baseline produced different numbers of texts");
  }
  if (system_texts.empty()) {
    throw ParameterError("win rate needs at least one prompt");
  }
  const auto& registry = judge.registry();
  WinRateReport report;
  report.prompt_count = system_texts.size();
  std::vector<std::size_t> all_dims;
  for (const auto& e : req.entries) {
    all_dims.push_back(registry.index_of(e.dim));
    report.dims.push_back(e.dim);
  }
  std::vector<std::size_t> sorted_dims = all_dims;
  std::sort(sorted_dims.begin(), sorted_dims.end());
  report.per_dim.resize(all_dims.size());
  const auto tally = [](WinCounts& w, Verdict v) {
    (v == Verdict::kA ? w.wins : v == Verdict::kB ? w.losses : w.ties) += 1;
  };
  for (std::size_t i = 0; i < system_texts.size(); ++i) {
    tally(report.overall, judge.judge_dims(system_texts[i], baseline_texts[i], sorted_dims));
    for (std::size_t k = 0; k < all_dims.size(); ++k) {
      const std::size_t one[1] = {all_dims[k]};
      tally(report.per_dim[k], judge.judge_dims(system_texts[i], baseline_texts[i], one));
    }
  }
  for (const auto c : all_dims) {
    if (judge.flagged()[c]) {
      report.flagged_dims.push_back(registry.at(c).symbol);
    }
  }
  return report;
}

WinRateReport win_rate(const Generator& system_gen, const Generator& baseline_gen,
                       const std::vector<std::string>& prompts, const PreferenceRequest& req,
                       const PreferenceRegistry& registry, double tau,
                       const std::vector<std::string>* norm_pool) {
  if (prompts.empty()) {
    throw ParameterError("win rate needs at least one prompt");
  }
  std::vector<std::string> sys;
  std::vector<std::string> base;
  sys.reserve(prompts.size());
  base.reserve(prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    sys.push_back(system_gen(prompts[i], i));
    base.push_back(baseline_gen(prompts[i], i));
  }
  const Judge j(norm_pool != nullptr ? *norm_pool : base, registry, tau);
  return win_rate_from_texts(sys, base, req, j);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

CorrelationMatrix correlation_matrix(const std::vector<std::string>& generations,
                                     const PreferenceRegistry& registry, const Lexicons& lex) {
  if (generations.size() < 3) {
    throw ParameterError("correlation needs at least 3 generations");
  }
  const std::size_t d = registry.size();
  std::vector<std::vector<double>> columns(d);
  for (const auto& text : generations) {
    const auto s = oracle_scores(text, registry, lex);
    for (std::size_t c = 0; c < d; ++c) {
      columns[c].push_back(s[c]);
    }
  }
  CorrelationMatrix m;
  for (const auto& dim : registry.dims()) {
    m.dims.push_back(dim.symbol);
  }
  m.values.assign(d * d, std::numeric_limits<double>::quiet_NaN());
  m.defined.assign(d * d, false);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      const double r = pearson(columns[i], columns[j]);
      if (std::isnan(r)) {
        continue;
      }
      const double v = i == j ? 1.0 : r;
      m.values[i * d + j] = m.values[j * d + i] = v;
      m.defined[i * d + j] = m.defined[j * d + i] = true;
    }
  }
  return m;
}

std::string CorrelationMatrix::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "dim";
  for (const auto& d : dims) {
    out << ',' << d;
  }
  out << '\n';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    out << dims[i];
    for (std::size_t j = 0; j < dims.size(); ++j) {
      out << ',';
      if (is_defined(i, j)) {
        out << at(i, j);
      } else {
        out << "NA";
      }
    }
    out << '\n';
  }
  return out.str();
}

std::vector<AlphaTuple> default_single_grid() {
  return {{0.05}, {0.1}, {0.3}, {0.5}, {0.8}};
}

std::vector<double> default_multi_values() { return {0.5, 0.8}; }

std::vector<AlphaTuple> product_grid(const std::vector<double>& values, std::size_t k) {
  std::vector<AlphaTuple> grid{{}};
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<AlphaTuple> next;
    for (const auto& prefix : grid) {
      for (const double v : values) {
        auto t = prefix;
        t.push_back(v);
        next.push_back(std::move(t));
      }
    }
    grid = std::move(next);
  }
  return grid;
}

PreferenceRequest make_request(const std::vector<std::string>& dims, const AlphaTuple& alphas) {
  if (dims.size() != alphas.size()) {
    throw ParameterError("alpha tuple length does not match the number of dimensions");
  }
  PreferenceRequest req;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    req.entries.push_back({dims[i], alphas[i]});
  }
  return req;
}

Generator make_generator(const NgramLM& lm, const ClassifierModel& clf, const Vocab& vocab,
                         PreferenceRequest req, DecodeConfig cfg) {
  return [&lm, &clf, &vocab, req = std::move(req), cfg](const std::string& prompt,
                                                       std::size_t index) {
    DecodeConfig c = cfg;
    c.seed = derive_seed(cfg.seed, index);
    c.trace = false;
    return generate(lm, clf, prompt, req, c, vocab).text;
  };
}

SweepReport sweep_alpha(const std::vector<AlphaTuple>& grid, const std::vector<std::string>& req_dims,
                        const std::array<std::vector<std::string>, 2>& subsets, const NgramLM& lm,
                        const ClassifierModel& clf, const Vocab& vocab, const DecodeConfig& cfg,
                        double tau) {
  if (grid.empty()) {
    throw ParameterError("sweep grid is empty");
  }
  SweepReport report;
  report.dims = req_dims;
  const auto vanilla = make_generator(lm, clf, vocab, {}, cfg);
  std::array<std::vector<std::string>, 2> baseline_texts;
  std::vector<Judge> judges;
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t i = 0; i < subsets[s].size(); ++i) {
      baseline_texts[s].push_back(vanilla(subsets[s][i], i));
    }
    judges.emplace_back(baseline_texts[s], clf.registry(), tau);
  }
  for (const auto& alphas : grid) {
    const auto req = make_request(req_dims, alphas);
    resolve_request(req, clf.registry(), cfg.allow_opposites);
    const auto guided = make_generator(lm, clf, vocab, req, cfg);
    SweepRow row{alphas, {}, 0.0};
    for (std::size_t s = 0; s < 2; ++s) {
      std::vector<std::string> texts;
      for (std::size_t i = 0; i < subsets[s].size(); ++i) {
        texts.push_back(guided(subsets[s][i], i));
      }
      row.subset_win_rate[s] = win_rate_from_texts(texts, baseline_texts[s], req, judges[s]).win_rate();
    }
    row.average = 0.5 * (row.subset_win_rate[0] + row.subset_win_rate[1]);
    report.rows.push_back(std::move(row));
  }
  const SweepRow* best = &report.rows.front();
  for (const auto& row : report.rows) {
    if (row.average > best->average || (row.average == best->average && row.alphas < best->alphas)) {
      best = &row;
    }
  }
  report.selected = best->alphas;
  report.selected_average = best->average;
  return report;
}

nlohmann::ordered_json to_json(const WinRateReport& r) {
  nlohmann::ordered_json j;
  j["wins"] = r.overall.wins;
  j["ties"] = r.overall.ties;
  j["losses"] = r.overall.losses;
  j["total"] = r.overall.total();
  j["win_rate"] = r.win_rate();
  j["prompt_count"] = r.prompt_count;
  auto per = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < r.dims.size(); ++k) {
    per.push_back({{"dim", r.dims[k]},
                   {"wins", r.per_dim[k].wins},
                   {"ties", r.per_dim[k].ties},
                   {"losses", r.per_dim[k].losses},
                   {"win_rate", r.per_dim[k].win_rate()}});
  }
  j["per_dim"] = per;
  j["flagged_dims"] = r.flagged_dims;
  return j;
}

nlohmann::ordered_json to_json(const SweepReport& r) {
  nlohmann::ordered_json j;
  j["dims"] = r.dims;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"alphas", row.alphas},
                    {"subset_win_rate", row.subset_win_rate},
                    {"average", row.average}});
  }
  j["rows"] = rows;
  j["selected"] = r.selected;
  j["selected_average"] = r.selected_average;
  return j;
}

nlohmann::ordered_json to_json(const CorrelationMatrix& m) {
  nlohmann::ordered_json j;
  j["dims"] = m.dims;
  auto rows = nlohmann::ordered_json::array();
  const std::size_t d = m.dims.size();
  for (std::size_t i = 0; i < d; ++i) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < d; ++k) {
      row.push_back(m.is_defined(i, k) ? nlohmann::ordered_json(m.at(i, k)) : nlohmann::ordered_json());
    }
    rows.push_back(row);
  }
  j["matrix"] = rows;
  return j;
}

}  // namespace prefguide
