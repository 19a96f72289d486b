// SPDX-License-Identifier: Apache-2.0
#include "prefguide/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <limits>
#include <optional>
#include <numeric>

#include "prefguide/rng.hpp"

namespace prefguide {

std::string feature_name(FeatureKey key) {
  const auto prev = static_cast<std::uint32_t>(key >> 32);
  const auto tok = static_cast<std::uint32_t>(key & 0xFFFFFFFFu);
  if (prev == kNoToken) {
    return "u:" + std::to_string(tok);
  }
  return "b:" + std::to_string(prev) + "," + std::to_string(tok);
}

FeatureKey parse_feature_name(const std::string& name) {
  const auto parse_id = [&](const std::string& s) -> std::uint32_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos || s.size() > 10) {
      throw ParameterError("malformed feature name: " + name);
    }
    const unsigned long long v = std::stoull(s);
    if (v >= kNoToken) {
      throw ParameterError("malformed feature name: " + name);
    }
    return static_cast<std::uint32_t>(v);
  };
  if (name.rfind("u:", 0) == 0) {
    return unigram_key(parse_id(name.substr(2)));
  }
  if (name.rfind("b:", 0) == 0) {
    const auto comma = name.find(',', 2);
    if (comma == std::string::npos) {
      throw ParameterError("malformed feature name: " + name);
    }
    return bigram_key(parse_id(name.substr(2, comma - 2)), parse_id(name.substr(comma + 1)));
  }
  throw ParameterError("malformed feature name: " + name);
}

FeatureVector featurize(std::span<const TokenId> seq) {
  FeatureVector fv;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    ++fv.counts[unigram_key(seq[i])];
    if (i > 0) {
      ++fv.counts[bigram_key(seq[i - 1], seq[i])];
    }
  }
  return fv;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    p[c] = std::exp(logits[c] - mx);
    sum += p[c];
  }
  for (auto& x : p) {
    x /= sum;
  }
  return p;
}

ClassifierModel::ClassifierModel(PreferenceRegistry registry, std::size_t vocab_size,
                                 std::vector<FeatureKey> features, std::vector<double> weights)
    : registry_(std::move(registry)),
      vocab_size_(vocab_size),
      features_(std::move(features)),
      weights_(std::move(weights)) {
  const std::size_t d = registry_.size();
  if (weights_.size() != features_.size() * d) {
    throw ParameterError("weight matrix shape does not match features x classes");
  }
  for (const double w : weights_) {
    if (!std::isfinite(w)) {
      throw ParameterError("classifier weights must be finite");
    }
  }
  unigram_rows_.assign(vocab_size_, -1);
  index_.reserve(features_.size());
  for (std::size_t row = 0; row < features_.size(); ++row) {
    const FeatureKey key = features_[row];
    if (!index_.emplace(key, static_cast<std::uint32_t>(row)).second) {
      throw ParameterError("duplicate feature " + feature_name(key));
    }
    const auto prev = static_cast<std::uint32_t>(key >> 32);
    const auto tok = static_cast<std::uint32_t>(key & 0xFFFFFFFFu);
    if (tok >= vocab_size_ || (prev != kNoToken && prev >= vocab_size_)) {
      throw ParameterError("feature " + feature_name(key) + " outside vocabulary");
    }
    if (prev == kNoToken) {
      unigram_rows_[tok] = static_cast<std::int64_t>(row);
    } else {
      bigram_rows_[prev].emplace_back(tok, static_cast<std::uint32_t>(row));
    }
  }
  for (auto& [prev, rows] : bigram_rows_) {
    std::sort(rows.begin(), rows.end());
  }
}

std::int64_t ClassifierModel::feature_row(FeatureKey key) const {
  const auto it = index_.find(key);
  return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

void ClassifierModel::add_row(std::size_t row, std::span<double> z) const {
  const std::size_t d = z.size();
  const double* w = weights_.data() + row * d;
  for (std::size_t c = 0; c < d; ++c) {
    z[c] += w[c];
  }
}

std::vector<double> ClassifierModel::logits(const FeatureVector& fv) const {
  const std::size_t d = num_classes();
  std::vector<double> z(d, 0.0);
  for (const auto& [key, count] : fv.counts) {
    const auto row = feature_row(key);
    if (row < 0) {
      continue;
    }
    const double* w = weights_.data() + static_cast<std::size_t>(row) * d;
    for (std::size_t c = 0; c < d; ++c) {
      z[c] += static_cast<double>(count) * w[c];
    }
  }
  return z;
}

std::vector<double> ClassifierModel::class_posterior(std::span<const TokenId> seq,
                                                     OpCounters* counters) const {
  if (counters != nullptr) {
    ++counters->clf_context_encodings;
  }
  return softmax(logits(featurize(seq)));
}

ClassMatrix ClassifierModel::class_matrix(std::span<const TokenId> ctx,
                                          OpCounters* counters) const {
  const std::size_t d = num_classes();
  const std::vector<double> z = logits(featurize(ctx));
  if (counters != nullptr) {
    ++counters->clf_context_encodings;
  }

  const std::vector<std::pair<TokenId, std::uint32_t>>* bigrams = nullptr;
  if (!ctx.empty()) {
    const auto it = bigram_rows_.find(ctx.back());
    if (it != bigram_rows_.end()) {
      bigrams = &it->second;
    }
  }
  std::size_t next_bigram = 0;

  ClassMatrix m{vocab_size_, d, std::vector<double>(vocab_size_ * d)};
  std::vector<double> row_logits(d);
  for (TokenId v = 0; v < vocab_size_; ++v) {
    std::copy(z.begin(), z.end(), row_logits.begin());
    if (unigram_rows_[v] >= 0) {
      add_row(static_cast<std::size_t>(unigram_rows_[v]), row_logits);
    }
    if (bigrams != nullptr && next_bigram < bigrams->size() && (*bigrams)[next_bigram].first == v) {
      add_row((*bigrams)[next_bigram].second, row_logits);
      ++next_bigram;
    }
    const double mx = *std::max_element(row_logits.begin(), row_logits.end());
    double sum = 0.0;
    double* out = m.values.data() + static_cast<std::size_t>(v) * d;
    for (std::size_t c = 0; c < d; ++c) {
      out[c] = std::exp(row_logits[c] - mx);
      sum += out[c];
    }
    for (std::size_t c = 0; c < d; ++c) {
      out[c] /= sum;
    }
  }
  return m;
}

ClassifierModel ClassifierModel::with_weights(std::vector<double> weights) const {
  return ClassifierModel(registry_, vocab_size_, features_, std::move(weights));
}

std::vector<FeatureKey> build_feature_index(const ExampleSet& train, const Vocab& vocab,
                                            std::size_t budget) {
  std::map<FeatureKey, std::uint64_t> freq;
  for (const auto& ex : train.examples) {
    const auto seq = example_sequence(ex, vocab);
    for (const auto& [key, n] : featurize(seq).counts) {
      freq[key] += n;
    }
  }
  std::vector<std::pair<FeatureKey, std::uint64_t>> ranked(freq.begin(), freq.end());
  if (budget > 0 && ranked.size() > budget) {
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    ranked.resize(budget);
  }
  std::vector<FeatureKey> keys;
  keys.reserve(ranked.size());
  for (const auto& [key, n] : ranked) {
    keys.push_back(key);
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

ClassifierModel zero_classifier(const PreferenceRegistry& registry, std::size_t vocab_size,
                                std::vector<FeatureKey> features) {
  std::vector<double> w(features.size() * registry.size(), 0.0);
  return ClassifierModel(registry, vocab_size, std::move(features), std::move(w));
}

LossGrad loss_and_grad(const ClassifierModel& model, std::span<const Example> batch,
                       const Vocab& vocab, Warnings* warnings) {
  if (batch.empty()) {
    throw ParameterError("loss_and_grad needs a non-empty batch");
  }
  const std::size_t d = model.num_classes();
  const auto& weights = model.weights();

  struct Prepared {
    TokenIdSeq seq;
    std::size_t gen_start;
    std::size_t label;
  };
  std::vector<Prepared> items;
  items.reserve(batch.size());
  for (const auto& ex : batch) {
    const std::size_t label = model.registry().index_of(ex.label);
    const auto prompt = encode(ex.prompt, vocab);
    const auto gen = encode(ex.generation, vocab);
    if (gen.empty()) {
      if (warnings != nullptr) {
        warnings->add("skipped example with empty generation (label " + ex.label + ")");
      }
      continue;
    }
    Prepared p{{kBos}, 0, label};
    p.seq.insert(p.seq.end(), prompt.begin(), prompt.end());
    p.seq.push_back(kSep);
    p.gen_start = p.seq.size();
    p.seq.insert(p.seq.end(), gen.begin(), gen.end());
    p.seq.push_back(kEos);
    items.push_back(std::move(p));
  }
  if (items.empty()) {
    throw ParameterError("every example in the batch has an empty generation");
  }

  LossGrad out;
  out.grad.assign(weights.size(), 0.0);
  out.examples_used = items.size();
  const double inv_n = 1.0 / static_cast<double>(items.size());

  std::vector<double> z(d);
  std::vector<double> p(d);
  std::vector<std::array<std::int64_t, 2>> added;  // feature rows introduced by token t
  std::vector<double> residual;                    // per generation position, d values
  std::vector<double> suffix(d);
  for (const auto& item : items) {
    const auto& seq = item.seq;
    const std::size_t n_gen = seq.size() - item.gen_start;
    const double w = inv_n / static_cast<double>(n_gen);

    std::fill(z.begin(), z.end(), 0.0);
    added.assign(seq.size(), {-1, -1});
    residual.assign(n_gen * d, 0.0);
    double example_loss = 0.0;
    for (std::size_t t = 0; t < seq.size(); ++t) {
      added[t][0] = model.feature_row(unigram_key(seq[t]));
      if (t > 0) {
        added[t][1] = model.feature_row(bigram_key(seq[t - 1], seq[t]));
      }
      for (const auto row : added[t]) {
        if (row >= 0) {
          const double* wr = weights.data() + static_cast<std::size_t>(row) * d;
          for (std::size_t c = 0; c < d; ++c) {
            z[c] += wr[c];
          }
        }
      }
      if (t < item.gen_start) {
        continue;
      }
      const double mx = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        p[c] = std::exp(z[c] - mx);
        sum += p[c];
      }
      example_loss -= (z[item.label] - mx) - std::log(sum);
      double* r = residual.data() + (t - item.gen_start) * d;
      for (std::size_t c = 0; c < d; ++c) {
        r[c] = w * (p[c] / sum - (c == item.label ? 1.0 : 0.0));
      }
    }
    out.loss += w * example_loss;

    // A feature introduced at token t is present at every later position, so
    // its gradient is the suffix sum of residuals from max(t, gen_start).
    std::fill(suffix.begin(), suffix.end(), 0.0);
    for (std::size_t t = seq.size(); t-- > 0;) {
      if (t >= item.gen_start) {
        const double* r = residual.data() + (t - item.gen_start) * d;
        for (std::size_t c = 0; c < d; ++c) {
          suffix[c] += r[c];
        }
      }
      for (const auto row : added[t]) {
        if (row >= 0) {
          double* g = out.grad.data() + static_cast<std::size_t>(row) * d;
          for (std::size_t c = 0; c < d; ++c) {
            g[c] += suffix[c];
          }
        }
      }
    }
  }
  return out;
}

double dataset_loss(const ClassifierModel& model, const ExampleSet& set, const Vocab& vocab) {
  return loss_and_grad(model, set.examples, vocab).loss;
}

AccuracyReport eval_accuracy(const ClassifierModel& model, const ExampleSet& eval,
                             const Vocab& vocab) {
  if (eval.examples.empty()) {
    throw ParameterError("eval_accuracy needs a non-empty evaluation set");
  }
  const std::size_t d = model.num_classes();
  AccuracyReport report;
  report.per_class.assign(d, 0.0);
  report.per_class_total.assign(d, 0);
  std::vector<std::size_t> correct(d, 0);
  std::size_t total_correct = 0;
  for (const auto& ex : eval.examples) {
    const std::size_t label = model.registry().index_of(ex.label);
    const auto post = model.class_posterior(example_sequence(ex, vocab));
    const auto pred = static_cast<std::size_t>(
        std::distance(post.begin(), std::max_element(post.begin(), post.end())));
    ++report.per_class_total[label];
    if (pred == label) {
      ++correct[label];
      ++total_correct;
    }
  }
  report.total = eval.examples.size();
  report.overall = static_cast<double>(total_correct) / static_cast<double>(report.total);
  for (std::size_t c = 0; c < d; ++c) {
    report.per_class[c] = report.per_class_total[c] == 0
                              ? std::numeric_limits<double>::quiet_NaN()
                              : static_cast<double>(correct[c]) /
                                    static_cast<double>(report.per_class_total[c]);
  }
  return report;
}

std::pair<ClassifierModel, TrainReport> train_classifier(const ExampleSet& train,
                                                         const ExampleSet& eval,
                                                         const Vocab& vocab,
                                                         const TrainConfig& config) {
  if (train.examples.empty()) {
    throw ParameterError("train_classifier needs training examples");
  }
  if (config.batch_size == 0) {
    throw ParameterError("batch_size must be positive");
  }
  if (!(config.lr > 0.0) || !(config.l2 >= 0.0)) {
    throw ParameterError("lr must be > 0 and l2 >= 0");
  }
  const bool has_eval = !eval.examples.empty();
  TrainReport report;
  report.config = config;

  ClassifierModel model =
      zero_classifier(train.registry, vocab.size(), build_feature_index(train, vocab, config.feature_budget));
  std::vector<double> weights = model.weights();

  Warnings warnings;
  const auto measure = [&](const ClassifierModel& m) {
    report.train_loss.push_back(loss_and_grad(m, train.examples, vocab, &warnings).loss);
    report.eval_loss.push_back(has_eval ? dataset_loss(m, eval, vocab) : report.train_loss.back());
  };
  measure(model);
  double best_loss = report.eval_loss.back();
  std::vector<double> best_weights = weights;

  Rng rng(config.seed);
  std::vector<std::size_t> order(train.examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Example> batch;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order, rng);
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train.examples[order[i]]);
      }
      LossGrad lg;
      try {
        lg = loss_and_grad(model, batch, vocab);
      } catch (const ParameterError&) {
        continue;  // batch made only of empty generations
      }
      if (!std::isfinite(lg.loss)) {
        throw TrainingDivergedError(config.lr, epoch, batch_index);
      }
      for (std::size_t i = 0; i < weights.size(); ++i) {
        weights[i] -= config.lr * (lg.grad[i] + config.l2 * weights[i]);
        if (!std::isfinite(weights[i])) {
          throw TrainingDivergedError(config.lr, epoch, batch_index);
        }
      }
      model = model.with_weights(weights);
    }
    measure(model);
    if (!std::isfinite(report.train_loss.back()) || !std::isfinite(report.eval_loss.back())) {
      throw TrainingDivergedError(config.lr, epoch, batch_index);
    }
    report.epochs_run = epoch;
    if (report.eval_loss.back() < best_loss) {
      best_loss = report.eval_loss.back();
      best_weights = weights;
      report.best_epoch = epoch;
    }
  }
  model = model.with_weights(std::move(best_weights));
  if (has_eval) {
    report.eval_accuracy = eval_accuracy(model, eval, vocab);
  }
  // Deduplicate: the epoch measurements repeat skip warnings.
  std::sort(warnings.messages.begin(), warnings.messages.end());
  warnings.messages.erase(std::unique(warnings.messages.begin(), warnings.messages.end()),
                          warnings.messages.end());
  report.warnings = std::move(warnings.messages);
  return {std::move(model), std::move(report)};
}

std::pair<ClassifierModel, TrainReport> train_classifier_lr_search(
    const ExampleSet& train, const ExampleSet& eval, const Vocab& vocab, const TrainConfig& config,
    const std::vector<double>& lr_grid) {
  if (lr_grid.empty()) {
    return train_classifier(train, eval, vocab, config);
  }
  std::optional<std::pair<ClassifierModel, TrainReport>> best;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, double>> search;
  std::optional<TrainingDivergedError> last_error;
  for (const double lr : lr_grid) {
    TrainConfig c = config;
    c.lr = lr;
    try {
      auto run = train_classifier(train, eval, vocab, c);
      const double loss = run.second.eval_loss[run.second.best_epoch];
      search.emplace_back(lr, loss);
      if (loss < best_loss) {
        best_loss = loss;
        best = std::move(run);
      }
    } catch (const TrainingDivergedError& e) {
      search.emplace_back(lr, std::numeric_limits<double>::infinity());
      last_error = e;
    }
  }
  if (!best) {
    throw *last_error;
  }
  best->second.lr_search = std::move(search);
  return std::move(*best);
}

}  // namespace prefguide
