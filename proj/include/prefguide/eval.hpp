// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prefguide/classifier.hpp"
#include "prefguide/data_synth.hpp"
#include "prefguide/decoder.hpp"
#include "prefguide/ngram_lm.hpp"

namespace prefguide {

// Programmatic per-dimension score of a text:
//   concise  = -token count        verbose   = +token count
//   simple   = -mean word length   technical = +mean word length
//   playful  = playful hit rate    harsh     = harsh hit rate
// Word length averages over tokens with at least one alphanumeric character;
// hit rates are lexicon hits over all tokens. Empty text scores 0.
double oracle_score(std::string_view text, std::string_view dim,
                    const Lexicons& lex = default_lexicons());

std::vector<double> oracle_scores(std::string_view text, const PreferenceRegistry& registry,
                                  const Lexicons& lex = default_lexicons());

enum class Verdict { kA, kB, kTie };
std::string_view verdict_name(Verdict v);

inline constexpr double kDefaultTau = 0.05;
inline constexpr std::size_t kMinNormPool = 30;

// Pairwise judge: oracle scores are z-normalized with the pool's mean and
// (population) standard deviation, averaged over the requested dimensions,
// and the difference is compared against tau. A dimension whose pool
// deviation is zero contributes 0 and is flagged.
class Judge {
 public:
  Judge(const std::vector<std::string>& norm_pool, const PreferenceRegistry& registry,
        double tau = kDefaultTau, const Lexicons& lex = default_lexicons());

  double composite(std::string_view text, std::span<const std::size_t> dims) const;
  Verdict judge(std::string_view a, std::string_view b, const PreferenceRequest& req) const;
  Verdict judge_dims(std::string_view a, std::string_view b,
                     std::span<const std::size_t> dims) const;

  const std::vector<double>& mean() const noexcept { return mean_; }
  const std::vector<double>& stddev() const noexcept { return stddev_; }
  const std::vector<bool>& flagged() const noexcept { return flagged_; }
  double tau() const noexcept { return tau_; }
  const PreferenceRegistry& registry() const noexcept { return registry_; }

 private:
  PreferenceRegistry registry_;
  const Lexicons* lex_;
  double tau_;
  std::vector<double> mean_;
  std::vector<double> stddev_;
  std::vector<bool> flagged_;
};

Verdict judge(std::string_view a, std::string_view b, const PreferenceRequest& req,
              const std::vector<std::string>& norm_pool,
              const PreferenceRegistry& registry = default_registry(), double tau = kDefaultTau);

struct WinCounts {
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t losses = 0;

  std::size_t total() const noexcept { return wins + ties + losses; }
  // Ties count half.
  double win_rate() const;
};

struct WinRateReport {
  WinCounts overall;
  std::vector<std::string> dims;
  std::vector<WinCounts> per_dim;
  std::size_t prompt_count = 0;
  std::vector<std::string> flagged_dims;

  double win_rate() const { return overall.win_rate(); }
};

// Text for the i-th prompt.
using Generator = std::function<std::string(const std::string& prompt, std::size_t index)>;

// Judges system vs baseline output per prompt. Without an explicit pool the
// baseline's own generations normalize the scores.
WinRateReport win_rate(const Generator& system_gen, const Generator& baseline_gen,
                       const std::vector<std::string>& prompts, const PreferenceRequest& req,
                       const PreferenceRegistry& registry = default_registry(),
                       double tau = kDefaultTau,
                       const std::vector<std::string>* norm_pool = nullptr);

WinRateReport win_rate_from_texts(const std::vector<std::string>& system_texts,
                                  const std::vector<std::string>& baseline_texts,
                                  const PreferenceRequest& req, const Judge& judge);

struct CorrelationMatrix {
  std::vector<std::string> dims;
  std::vector<double> values;  // d x d row-major; NaN where undefined
  std::vector<bool> defined;

  double at(std::size_t i, std::size_t j) const { return values[i * dims.size() + j]; }
  bool is_defined(std::size_t i, std::size_t j) const { return defined[i * dims.size() + j]; }
  std::string to_csv() const;
};

// Pearson correlation of per-text oracle scores. Constant columns give
// undefined entries.
CorrelationMatrix correlation_matrix(const std::vector<std::string>& generations,
                                     const PreferenceRegistry& registry = default_registry(),
                                     const Lexicons& lex = default_lexicons());

double pearson(std::span<const double> x, std::span<const double> y);

using AlphaTuple = std::vector<double>;

std::vector<AlphaTuple> default_single_grid();                       // {0.05 .. 0.8}
std::vector<AlphaTuple> product_grid(const std::vector<double>& values, std::size_t k);
std::vector<double> default_multi_values();                          // {0.5, 0.8}

struct SweepRow {
  AlphaTuple alphas;
  std::array<double, 2> subset_win_rate{};
  double average = 0.0;
};

struct SweepReport {
  std::vector<std::string> dims;
  std::vector<SweepRow> rows;
  AlphaTuple selected;
  double selected_average = 0.0;
};

// Wraps the decoder as a Generator; prompt i decodes with seed
// derive_seed(cfg.seed, i) so system and baseline share random streams.
Generator make_generator(const NgramLM& lm, const ClassifierModel& clf, const Vocab& vocab,
                         PreferenceRequest req, DecodeConfig cfg);

PreferenceRequest make_request(const std::vector<std::string>& dims, const AlphaTuple& alphas);

// Grid search over alpha tuples: for each tuple the guided generator is
// compared with the vanilla baseline on both subsets and the two win rates
// are averaged. Ties in the average go to the lexicographically smallest tuple.
SweepReport sweep_alpha(const std::vector<AlphaTuple>& grid, const std::vector<std::string>& req_dims,
                        const std::array<std::vector<std::string>, 2>& subsets, const NgramLM& lm,
                        const ClassifierModel& clf, const Vocab& vocab, const DecodeConfig& cfg,
                        double tau = kDefaultTau);

nlohmann::ordered_json to_json(const WinRateReport& r);
nlohmann::ordered_json to_json(const SweepReport& r);
nlohmann::ordered_json to_json(const CorrelationMatrix& m);

}  // namespace prefguide
