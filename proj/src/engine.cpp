// SPDX-License-Identifier: Apache-2.0
#include "prefguide/engine.hpp"

#include <numeric>

#include "prefguide/error.hpp"
#include "prefguide/rng.hpp"

namespace prefguide {

Corpus make_corpus(const RunConfig& cfg, const std::filesystem::path& data_dir) {
  const auto seeds = load_seed_texts(data_dir / "seed_sentences.txt");
  const auto lex = load_lexicons(data_dir / "lexicons");
  const auto all = synth_corpus(seeds, default_registry(), cfg.synth_per_dim, cfg.synth_seed, lex);
  auto [train, eval] = split(all, cfg.synth_eval_fraction, cfg.synth_seed);
  return {std::move(train), std::move(eval)};
}

Vocab corpus_vocab(const ExampleSet& train, const RunConfig& cfg) {
  std::vector<std::string> texts;
  texts.reserve(train.examples.size() * 2);
  for (const auto& ex : train.examples) {
    texts.push_back(ex.prompt);
    texts.push_back(ex.generation);
  }
  return build_vocab(texts, cfg.vocab_min_freq, cfg.vocab_max_size);
}

TrainedModels train_models(const ExampleSet& train, const ExampleSet& eval, const RunConfig& cfg) {
  Vocab vocab = corpus_vocab(train, cfg);
  Warnings warnings;
  NgramLM lm = train_lm(train, vocab, cfg.lm, &warnings);
  auto [clf, report] = cfg.clf_lr_grid.empty()
                           ? train_classifier(train, eval, vocab, cfg.clf)
                           : train_classifier_lr_search(train, eval, vocab, cfg.clf, cfg.clf_lr_grid);
  report.warnings.insert(report.warnings.begin(), warnings.messages.begin(),
                         warnings.messages.end());
  return {std::move(vocab), std::move(lm), std::move(clf), std::move(report)};
}

Provenance make_provenance(const RunConfig& cfg) {
  Provenance p;
  p.data_seed = cfg.synth_seed;
  p.train_seed = cfg.clf.seed;
  p.build_timestamp = reproducible_timestamp();
  p.config = config_entries(cfg);
  return p;
}

PromptSets prompt_sets(const ExampleSet& eval, const RunConfig& cfg) {
  if (eval.examples.empty()) {
    throw ParameterError("no held-out examples to draw prompts from");
  }
  std::vector<std::size_t> order(eval.examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(cfg.synth_seed, 0x70726f6d));
  shuffle(order, rng);
  std::size_t next = 0;
  auto take = [&] { return eval.examples[order[next++ % order.size()]].prompt; };
  PromptSets sets;
  for (std::size_t i = 0; i < 2 * cfg.sweep_subset_size; ++i) {
    sets.sweep[i % 2].push_back(take());
  }
  for (std::size_t i = 0; i < cfg.eval_prompts; ++i) {
    sets.eval.push_back(take());
  }
  return sets;
}

Engine::Engine(Checkpoint checkpoint) : ckpt_(std::move(checkpoint)) {}

Engine Engine::load(const std::filesystem::path& path) { return Engine(load_checkpoint(path)); }

GenerationResult Engine::generate(std::string_view prompt, const PreferenceRequest& req,
                                  const DecodeConfig& cfg) const {
  return prefguide::generate(ckpt_.lm, ckpt_.clf, prompt, req, cfg, ckpt_.vocab);
}

Generator Engine::generator(const PreferenceRequest& req, const DecodeConfig& cfg) const {
  return make_generator(ckpt_.lm, ckpt_.clf, ckpt_.vocab, req, cfg);
}

SweepReport Engine::sweep(const std::vector<AlphaTuple>& grid, const std::vector<std::string>& dims,
                          const std::array<std::vector<std::string>, 2>& subsets,
                          const DecodeConfig& cfg, double tau) const {
  return sweep_alpha(grid, dims, subsets, ckpt_.lm, ckpt_.clf, ckpt_.vocab, cfg, tau);
}

std::vector<AlphaTuple> sweep_grid_for(const RunConfig& cfg, std::size_t num_dims) {
  if (num_dims == 0) {
    throw ParameterError("sweep needs at least one dimension");
  }
  if (num_dims == 1) {
    return product_grid(cfg.sweep_grid, 1);
  }
  return product_grid(cfg.sweep_multi_grid, num_dims);
}

}  // namespace prefguide
