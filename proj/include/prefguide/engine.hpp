// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "prefguide/checkpoint.hpp"
#include "prefguide/config.hpp"
#include "prefguide/data_synth.hpp"
#include "prefguide/decoder.hpp"
#include "prefguide/eval.hpp"

namespace prefguide {

struct Corpus {
  ExampleSet train;
  ExampleSet eval;
};

// Seed sentences from data_dir, synthesized and split per cfg.
Corpus make_corpus(const RunConfig& cfg, const std::filesystem::path& data_dir = default_data_dir());

// Vocabulary over the prompts and generations of the training split.
Vocab corpus_vocab(const ExampleSet& train, const RunConfig& cfg);

struct TrainedModels {
  Vocab vocab;
  NgramLM lm;
  ClassifierModel clf;
  TrainReport report;
};

TrainedModels train_models(const ExampleSet& train, const ExampleSet& eval, const RunConfig& cfg);

Provenance make_provenance(const RunConfig& cfg);

// Held-out prompts: two sweep subsets of cfg.sweep_subset_size and an
// evaluation list of cfg.eval_prompts, drawn from a seeded shuffle of the
// eval split (wrapping around when it is short).
struct PromptSets {
  std::array<std::vector<std::string>, 2> sweep;
  std::vector<std::string> eval;
};
PromptSets prompt_sets(const ExampleSet& eval, const RunConfig& cfg);

// Loaded models behind both the CLI and the HTTP service. Immutable;
// concurrent calls are safe.
class Engine {
 public:
  explicit Engine(Checkpoint checkpoint);
  static Engine load(const std::filesystem::path& path);

  const Vocab& vocab() const noexcept { return ckpt_.vocab; }
  const NgramLM& lm() const noexcept { return ckpt_.lm; }
  const ClassifierModel& clf() const noexcept { return ckpt_.clf; }
  const PreferenceRegistry& registry() const noexcept { return ckpt_.clf.registry(); }
  const Provenance& provenance() const noexcept { return ckpt_.provenance; }

  GenerationResult generate(std::string_view prompt, const PreferenceRequest& req,
                            const DecodeConfig& cfg) const;

  Generator generator(const PreferenceRequest& req, const DecodeConfig& cfg) const;

  SweepReport sweep(const std::vector<AlphaTuple>& grid, const std::vector<std::string>& dims,
                    const std::array<std::vector<std::string>, 2>& subsets,
                    const DecodeConfig& cfg, double tau) const;

 private:
  Checkpoint ckpt_;
};

// Alpha tuples for a sweep: the single grid for one dimension, the product
// of the multi grid otherwise.
std::vector<AlphaTuple> sweep_grid_for(const RunConfig& cfg, std::size_t num_dims);

}  // namespace prefguide
