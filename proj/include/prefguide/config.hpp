// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "prefguide/classifier.hpp"
#include "prefguide/decoder.hpp"
#include "prefguide/eval.hpp"
#include "prefguide/ngram_lm.hpp"

namespace prefguide {

// Every tunable of a run. The config file is flat `key = value` text with
// `#` comments; list values are comma separated. Keys are listed by
// config_entries() in file order.
struct RunConfig {
  std::size_t vocab_min_freq = 1;
  std::size_t vocab_max_size = 5000;

  std::size_t synth_per_dim = 1000;
  double synth_eval_fraction = 0.2;
  std::uint64_t synth_seed = 7;

  NgramConfig lm;

  TrainConfig clf = {.lr = 0.3, .epochs = 50};
  std::vector<double> clf_lr_grid = {1.0, 0.3, 0.1};  // empty: train once at clf.lr

  DecodeConfig decode;

  std::vector<double> sweep_grid = {0.05, 0.1, 0.3, 0.5, 0.8};
  std::vector<double> sweep_multi_grid = {0.5, 0.8};
  std::size_t sweep_subset_size = 50;

  std::size_t eval_prompts = 200;
  double judge_tau = kDefaultTau;
};

// Throws ParameterError for unknown keys and unparsable values.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

// Canonical (key, value) list; parse_config(format_config(c)) == c.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg);
std::string format_config(const RunConfig& cfg);

// Shortest text that parses back to the same double.
std::string format_double(double v);
std::vector<double> parse_double_list(std::string_view text);

}  // namespace prefguide
