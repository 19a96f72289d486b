// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "prefguide/preferences.hpp"
#include "prefguide/rng.hpp"

namespace prefguide {

// Directory holding lexicons/ and seed_sentences.txt.
std::filesystem::path default_data_dir();

// Term lists used by the synthetic transforms and by the oracle judges.
struct Lexicons {
  std::vector<std::string> connectives;  // multi-word filler clauses
  std::vector<std::string> technical;
  std::vector<std::string> playful;
  std::vector<std::string> harsh;
};

// Reads connectives.txt, technical.txt, playful.txt and harsh.txt from dir
// (one entry per line, blank lines ignored).
Lexicons load_lexicons(const std::filesystem::path& dir);
const Lexicons& default_lexicons();

std::vector<std::string> read_lines(const std::filesystem::path& path);
std::vector<std::string> load_seed_texts(const std::filesystem::path& path);

struct Example {
  std::string prompt;
  std::string generation;
  std::string label;

  bool operator==(const Example&) const = default;
};

struct ExampleSet {
  std::vector<Example> examples;
  PreferenceRegistry registry = default_registry();
  std::uint64_t seed = 0;
};

// Rewrites a sentence so it exhibits one preference dimension. Throws
// UnknownDimensionError for symbols outside the six built-in dimensions.
std::string transform(std::string_view sentence, std::string_view dim, Rng& rng,
                      const Lexicons& lex = default_lexicons());

ExampleSet synth_corpus(const std::vector<std::string>& seed_texts,
                        const PreferenceRegistry& registry, std::size_t per_dim,
                        std::uint64_t seed, const Lexicons& lex = default_lexicons());

// Stratified split into (train, eval).
std::pair<ExampleSet, ExampleSet> split(const ExampleSet& set, double eval_fraction,
                                        std::uint64_t seed);

// Dataset files: one JSON object per line with prompt, generation and label.
void write_examples(std::ostream& out, const ExampleSet& set);
void write_examples(const std::filesystem::path& path, const ExampleSet& set);
ExampleSet read_examples(std::istream& in, const PreferenceRegistry& registry = default_registry());
ExampleSet read_examples(const std::filesystem::path& path,
                         const PreferenceRegistry& registry = default_registry());

}  // namespace prefguide
