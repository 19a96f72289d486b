// SPDX-License-Identifier: Apache-2.0
#include "fixture.hpp"

#include <algorithm>

namespace prefguide::testing {

namespace {

SmallWorld build_small_world() {
  RunConfig cfg;
  cfg.synth_per_dim = 60;
  cfg.clf.lr = 0.3;
  cfg.clf.epochs = 20;
  cfg.clf_lr_grid.clear();
  Corpus corpus = make_corpus(cfg);
  TrainedModels m = train_models(corpus.train, corpus.eval, cfg);
  return {cfg, std::move(corpus), std::move(m.vocab), std::move(m.lm), std::move(m.clf)};
}

}  // namespace

const SmallWorld& small_world() {
  static const SmallWorld world = build_small_world();
  return world;
}

ClassifierModel random_classifier(std::size_t vocab_size, std::uint64_t seed, double scale,
                                  const PreferenceRegistry& registry) {
  std::vector<FeatureKey> features;
  for (TokenId v = 0; v < vocab_size; ++v) {
    features.push_back(unigram_key(v));
  }
  for (TokenId a = 0; a < vocab_size; ++a) {
    for (TokenId b = 0; b < vocab_size; ++b) {
      features.push_back(bigram_key(a, b));
    }
  }
  std::sort(features.begin(), features.end());
  Rng rng(seed);
  std::vector<double> weights(features.size() * registry.size());
  for (auto& w : weights) {
    w = scale * (2.0 * uniform01(rng) - 1.0);
  }
  return ClassifierModel(registry, vocab_size, std::move(features), std::move(weights));
}

TokenIdSeq random_context(Rng& rng, std::size_t vocab_size, std::size_t max_prompt,
                          std::size_t max_generation) {
  const std::size_t span = vocab_size - kNumSpecials;
  auto word = [&] { return static_cast<TokenId>(kNumSpecials + uniform_index(rng, span)); };
  TokenIdSeq ctx{kBos};
  const auto np = 1 + uniform_index(rng, max_prompt);
  for (std::size_t i = 0; i < np; ++i) ctx.push_back(word());
  ctx.push_back(kSep);
  const auto ng = uniform_index(rng, max_generation + 1);
  for (std::size_t i = 0; i < ng; ++i) ctx.push_back(word());
  return ctx;
}

Vocab make_vocab(const std::vector<std::string>& words) {
  std::vector<std::string> tokens = {"<bos>", "<eos>", "<sep>", "<unk>"};
  tokens.insert(tokens.end(), words.begin(), words.end());
  return Vocab(std::move(tokens));
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("prefguide_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace prefguide::testing
