// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "prefguide/classifier.hpp"
#include "prefguide/ngram_lm.hpp"
#include "prefguide/vocab.hpp"

namespace prefguide {

inline constexpr int kCheckpointFormatVersion = 1;

struct Provenance {
  std::uint64_t data_seed = 0;
  std::uint64_t train_seed = 0;
  std::string build_timestamp = "0";
  // Echo of the run configuration as key/value pairs.
  std::vector<std::pair<std::string, std::string>> config;

  bool operator==(const Provenance&) const = default;
};

// SOURCE_DATE_EPOCH when set, otherwise "0".
std::string reproducible_timestamp();

struct Checkpoint {
  Vocab vocab;
  NgramLM lm;
  ClassifierModel clf;
  Provenance provenance;
};

// Canonical serialization: fixed key order, sorted count triples and
// shortest round-trip doubles, so equal models give equal bytes.
std::string serialize_checkpoint(const NgramLM& lm, const ClassifierModel& clf, const Vocab& vocab,
                                 const Provenance& provenance);
void save_checkpoint(const std::filesystem::path& path, const NgramLM& lm,
                     const ClassifierModel& clf, const Vocab& vocab, const Provenance& provenance);

// Throws UnsupportedVersionError for an unknown format_version and
// CorruptCheckpointError for anything unparsable or inconsistent.
Checkpoint parse_checkpoint(const std::string& bytes);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace prefguide
