// SPDX-License-Identifier: Apache-2.0
#include "prefguide/checkpoint.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "prefguide/error.hpp"

namespace prefguide {

namespace {

using nlohmann::ordered_json;

ordered_json registry_json(const PreferenceRegistry& registry) {
  ordered_json dims = ordered_json::array();
  for (const auto& d : registry.dims()) {
    dims.push_back({{"symbol", d.symbol},
                    {"name", d.name},
                    {"pair_id", d.pair_id},
                    {"polarity", std::string(1, polarity_char(d.polarity))}});
  }
  return dims;
}

PreferenceRegistry registry_from_json(const ordered_json& j) {
  std::vector<Dimension> dims;
  for (const auto& d : j) {
    const auto pol = d.at("polarity").get<std::string>();
    if (pol != "+" && pol != "-") {
      throw CorruptCheckpointError("bad polarity '" + pol + "'");
    }
    dims.push_back({d.at("symbol").get<std::string>(), d.at("name").get<std::string>(),
                    d.at("pair_id").get<int>(),
                    pol == "+" ? Polarity::kPositive : Polarity::kNegative});
  }
  return PreferenceRegistry(std::move(dims));
}

Checkpoint from_json(const ordered_json& doc) {
  Vocab vocab(doc.at("vocab").get<std::vector<std::string>>());

  const auto& lm_j = doc.at("lm");
  NgramConfig cfg;
  cfg.order = lm_j.at("order").get<std::size_t>();
  cfg.k = lm_j.at("k").get<double>();
  cfg.lambdas = lm_j.at("lambdas").get<std::vector<double>>();
  std::vector<std::vector<CountTriple>> triples;
  for (const auto& table : lm_j.at("counts")) {
    auto& out = triples.emplace_back();
    for (const auto& t : table) {
      if (!t.is_array() || t.size() != 3) {
        throw CorruptCheckpointError("count triple must be [context, token, count]");
      }
      out.push_back({t[0].get<TokenIdSeq>(), t[1].get<TokenId>(), t[2].get<std::uint64_t>()});
    }
  }
  NgramLM lm = NgramLM::from_counts(vocab.size(), cfg, triples);

  const auto& clf_j = doc.at("classifier");
  PreferenceRegistry registry = registry_from_json(clf_j.at("dims"));
  std::vector<FeatureKey> features;
  for (const auto& name : clf_j.at("features")) {
    features.push_back(parse_feature_name(name.get<std::string>()));
  }
  const auto f = clf_j.at("num_features").get<std::size_t>();
  const auto d = clf_j.at("num_classes").get<std::size_t>();
  auto weights = clf_j.at("weights").get<std::vector<double>>();
  if (f != features.size() || d != registry.size() || weights.size() != f * d) {
    throw CorruptCheckpointError("classifier shape does not match its recorded F and d");
  }
  ClassifierModel clf(std::move(registry), vocab.size(), std::move(features), std::move(weights));

  const auto& prov_j = doc.at("provenance");
  Provenance prov;
  prov.data_seed = prov_j.at("data_seed").get<std::uint64_t>();
  prov.train_seed = prov_j.at("train_seed").get<std::uint64_t>();
  prov.build_timestamp = prov_j.at("build_timestamp").get<std::string>();
  for (const auto& [key, value] : prov_j.at("config").items()) {
    prov.config.emplace_back(key, value.get<std::string>());
  }
  return Checkpoint{std::move(vocab), std::move(lm), std::move(clf), std::move(prov)};
}

}  // namespace

std::string reproducible_timestamp() {
  const char* env = std::getenv("SOURCE_DATE_EPOCH");
  return env != nullptr && *env != '\0' ? std::string(env) : std::string("0");
}

std::string serialize_checkpoint(const NgramLM& lm, const ClassifierModel& clf, const Vocab& vocab,
                                 const Provenance& provenance) {
  if (lm.vocab_size() != vocab.size() || clf.vocab_size() != vocab.size()) {
    throw ParameterError("model vocabulary sizes do not match the tokenizer");
  }
  ordered_json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["vocab"] = vocab.tokens();

  ordered_json counts = ordered_json::array();
  for (const auto& table : lm.count_triples()) {
    ordered_json rows = ordered_json::array();
    for (const auto& t : table) {
      rows.push_back(ordered_json::array({t.context, t.token, t.count}));
    }
    counts.push_back(std::move(rows));
  }
  doc["lm"] = {{"order", lm.order()},
               {"k", lm.k()},
               {"lambdas", lm.lambdas()},
               {"counts", std::move(counts)}};

  ordered_json names = ordered_json::array();
  for (const auto key : clf.features()) {
    names.push_back(feature_name(key));
  }
  doc["classifier"] = {{"dims", registry_json(clf.registry())},
                       {"num_features", clf.num_features()},
                       {"num_classes", clf.num_classes()},
                       {"features", std::move(names)},
                       {"weights", clf.weights()}};

  ordered_json config = ordered_json::object();
  for (const auto& [key, value] : provenance.config) {
    config[key] = value;
  }
  doc["provenance"] = {{"data_seed", provenance.data_seed},
                       {"train_seed", provenance.train_seed},
                       {"build_timestamp", provenance.build_timestamp},
                       {"config", std::move(config)}};
  return doc.dump() + "\n";
}

void save_checkpoint(const std::filesystem::path& path, const NgramLM& lm,
                     const ClassifierModel& clf, const Vocab& vocab, const Provenance& provenance) {
  const std::string bytes = serialize_checkpoint(lm, clf, vocab, provenance);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot open checkpoint for writing: " + path.string());
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error("failed writing checkpoint: " + path.string());
  }
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpointError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version") ||
      !doc["format_version"].is_number_integer()) {
    throw CorruptCheckpointError("checkpoint has no format_version");
  }
  const auto version = doc["format_version"].get<std::int64_t>();
  if (version != kCheckpointFormatVersion) {
    throw UnsupportedVersionError("unsupported checkpoint format_version " +
                                  std::to_string(version) + " (expected " +
                                  std::to_string(kCheckpointFormatVersion) + ")");
  }
  try {
    return from_json(doc);
  } catch (const CorruptCheckpointError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const Error& e) {
    throw CorruptCheckpointError(std::string("inconsistent checkpoint: ") + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open checkpoint: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace prefguide
