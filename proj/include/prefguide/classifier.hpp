// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "prefguide/data_synth.hpp"
#include "prefguide/error.hpp"
#include "prefguide/ngram_lm.hpp"
#include "prefguide/preferences.hpp"
#include "prefguide/vocab.hpp"

namespace prefguide {

// Unigram and adjacent-bigram features packed as (prev << 32) | token, with
// prev = kNoToken for unigrams.
using FeatureKey = std::uint64_t;
inline constexpr std::uint32_t kNoToken = 0xFFFFFFFFu;

constexpr FeatureKey unigram_key(TokenId v) {
  return (static_cast<FeatureKey>(kNoToken) << 32) | v;
}
constexpr FeatureKey bigram_key(TokenId prev, TokenId v) {
  return (static_cast<FeatureKey>(prev) << 32) | v;
}
std::string feature_name(FeatureKey key);
FeatureKey parse_feature_name(const std::string& name);

struct FeatureVector {
  std::map<FeatureKey, std::uint32_t> counts;
  bool operator==(const FeatureVector&) const = default;
};

FeatureVector featurize(std::span<const TokenId> seq);

// |V| x d row-major matrix of class probabilities; row v is the class
// posterior after appending candidate token v to the context.
struct ClassMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t v, std::size_t c) const { return values[v * cols + c]; }
  std::span<const double> row(std::size_t v) const {
    return std::span<const double>(values).subspan(v * cols, cols);
  }
};

// Additive bag-of-n-gram softmax regression over the registry's classes.
// Logits are W^T phi(seq); features absent from the index contribute zero.
class ClassifierModel {
 public:
  ClassifierModel(PreferenceRegistry registry, std::size_t vocab_size,
                  std::vector<FeatureKey> features, std::vector<double> weights);

  const PreferenceRegistry& registry() const noexcept { return registry_; }
  std::size_t num_classes() const noexcept { return registry_.size(); }
  std::size_t num_features() const noexcept { return features_.size(); }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  const std::vector<FeatureKey>& features() const noexcept { return features_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  // Row index of a feature, or -1 when unknown.
  std::int64_t feature_row(FeatureKey key) const;

  std::vector<double> logits(const FeatureVector& fv) const;

  // Softmax over classes of the logits of seq. Counts one context encoding.
  std::vector<double> class_posterior(std::span<const TokenId> seq,
                                      OpCounters* counters = nullptr) const;

  // One featurization of ctx, then per candidate v only the two features
  // uni(v) and bi(last, v) are added to the shared context logits.
  ClassMatrix class_matrix(std::span<const TokenId> ctx, OpCounters* counters = nullptr) const;

  ClassifierModel with_weights(std::vector<double> weights) const;

 private:
  void add_row(std::size_t row, std::span<double> z) const;

  PreferenceRegistry registry_;
  std::size_t vocab_size_;
  std::vector<FeatureKey> features_;
  std::vector<double> weights_;  // num_features x num_classes, row-major
  std::unordered_map<FeatureKey, std::uint32_t> index_;
  std::vector<std::int64_t> unigram_rows_;  // by token id
  // For each previous token, (token, row) pairs of known bigrams sorted by token.
  std::unordered_map<TokenId, std::vector<std::pair<TokenId, std::uint32_t>>> bigram_rows_;
};

// Stable softmax with max-subtraction.
std::vector<double> softmax(std::span<const double> logits);

// Collects every feature of the training sequences; with budget > 0 keeps
// the budget most frequent (ties by key). Returned keys are sorted.
std::vector<FeatureKey> build_feature_index(const ExampleSet& train, const Vocab& vocab,
                                            std::size_t budget = 0);

ClassifierModel zero_classifier(const PreferenceRegistry& registry, std::size_t vocab_size,
                                std::vector<FeatureKey> features);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // same layout as the weights
  std::size_t examples_used = 0;
};

// Token-level classification loss averaged per example over its generation
// positions (terminal <eos> included) and then over examples, with its exact
// gradient. Examples whose generation encodes to nothing are skipped.
LossGrad loss_and_grad(const ClassifierModel& model, std::span<const Example> batch,
                       const Vocab& vocab, Warnings* warnings = nullptr);

struct TrainConfig {
  double lr = 1e-2;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  std::size_t feature_budget = 0;
};

struct AccuracyReport {
  double overall = 0.0;
  std::vector<double> per_class;
  std::vector<std::size_t> per_class_total;
  std::size_t total = 0;
};

struct TrainReport {
  std::vector<double> train_loss;  // index 0 is before the first update
  std::vector<double> eval_loss;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  AccuracyReport eval_accuracy;
  TrainConfig config;
  // (lr, best eval loss) per candidate when a learning-rate grid was searched.
  std::vector<std::pair<double, double>> lr_search;
  std::vector<std::string> warnings;
};

// Mini-batch gradient descent with L2; returns the best-eval-loss weights.
// Throws TrainingDivergedError on a non-finite loss.
std::pair<ClassifierModel, TrainReport> train_classifier(const ExampleSet& train,
                                                         const ExampleSet& eval,
                                                         const Vocab& vocab,
                                                         const TrainConfig& config = {});

// Trains once per learning rate and keeps the run with the lowest eval loss.
std::pair<ClassifierModel, TrainReport> train_classifier_lr_search(
    const ExampleSet& train, const ExampleSet& eval, const Vocab& vocab, const TrainConfig& config,
    const std::vector<double>& lr_grid);

double dataset_loss(const ClassifierModel& model, const ExampleSet& set, const Vocab& vocab);

// Scores each sequence by the posterior at its final position.
AccuracyReport eval_accuracy(const ClassifierModel& model, const ExampleSet& eval,
                             const Vocab& vocab);

}  // namespace prefguide
