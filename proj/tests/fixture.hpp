// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared models for the unit tests.

#include <filesystem>
#include <string>
#include <vector>

#include "prefguide/engine.hpp"
#include "prefguide/rng.hpp"

namespace prefguide::testing {

// A small corpus (60 examples per dimension) with trained models. Built once
// per test binary.
struct SmallWorld {
  RunConfig cfg;
  Corpus corpus;
  Vocab vocab;
  NgramLM lm;
  ClassifierModel clf;
};
const SmallWorld& small_world();

// Every unigram and bigram over vocab_size ids with N(0, scale^2)-ish
// uniform random weights; no training involved.
ClassifierModel random_classifier(std::size_t vocab_size, std::uint64_t seed, double scale = 1.0,
                                  const PreferenceRegistry& registry = default_registry());

// <bos> prompt <sep> partial generation, with random non-special ids.
TokenIdSeq random_context(Rng& rng, std::size_t vocab_size, std::size_t max_prompt = 8,
                          std::size_t max_generation = 8);

// Vocab of the specials followed by the given words.
Vocab make_vocab(const std::vector<std::string>& words);

// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

}  // namespace prefguide::testing
