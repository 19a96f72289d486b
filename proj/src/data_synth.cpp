// SPDX-License-Identifier: Apache-2.0
#include "prefguide/data_synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "prefguide/error.hpp"
#include "prefguide/vocab.hpp"

namespace prefguide {

namespace {

constexpr std::size_t kConciseLength = 8;
constexpr std::size_t kSimpleMaxWordLength = 5;
constexpr std::size_t kInsertions = 2;

bool is_punct_token(const std::string& tok) {
  return tok.size() == 1 && std::ispunct(static_cast<unsigned char>(tok[0]));
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) {
      out += ' ';
    }
    out += t;
  }
  return out;
}

// Index one past the last non-punctuation token; trailing punctuation stays
// at the end of the sentence after rewrites.
std::size_t body_end(const std::vector<std::string>& tokens) {
  std::size_t end = tokens.size();
  while (end > 0 && is_punct_token(tokens[end - 1])) {
    --end;
  }
  return end;
}

void insert_terms(std::vector<std::string>& tokens, const std::vector<std::string>& lexicon,
                  Rng& rng) {
  if (lexicon.empty()) {
    throw ParameterError("empty lexicon");
  }
  for (std::size_t k = 0; k < kInsertions; ++k) {
    const auto& term = lexicon[uniform_index(rng, lexicon.size())];
    const auto pos = static_cast<std::ptrdiff_t>(uniform_index(rng, body_end(tokens) + 1));
    tokens.insert(tokens.begin() + pos, term);
  }
}

}  // namespace

std::filesystem::path default_data_dir() { return PREFGUIDE_DATA_DIR; }

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open " + path.string());
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.find_first_not_of(" \t") != std::string::npos) {
      lines.push_back(line);
    }
  }
  return lines;
}

Lexicons load_lexicons(const std::filesystem::path& dir) {
  Lexicons lex;
  lex.connectives = read_lines(dir / "connectives.txt");
  lex.technical = read_lines(dir / "technical.txt");
  lex.playful = read_lines(dir / "playful.txt");
  lex.harsh = read_lines(dir / "harsh.txt");
  return lex;
}

const Lexicons& default_lexicons() {
  static const Lexicons lex = load_lexicons(default_data_dir() / "lexicons");
  return lex;
}

std::vector<std::string> load_seed_texts(const std::filesystem::path& path) {
  return read_lines(path);
}

std::string transform(std::string_view sentence, std::string_view dim, Rng& rng,
                      const Lexicons& lex) {
  auto tokens = normalize_tokens(sentence);
  if (tokens.empty()) {
    throw ParameterError("transform needs a non-empty sentence");
  }
  if (dim == "concise") {
    if (tokens.size() > kConciseLength) {
      tokens.resize(kConciseLength);
    }
  } else if (dim == "verbose") {
    if (lex.connectives.empty()) {
      throw ParameterError("empty connective lexicon");
    }
    const std::size_t end = body_end(tokens);
    std::vector<std::string> out(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(end));
    for (std::size_t k = 0; k < kInsertions; ++k) {
      out.emplace_back(",");
      for (auto& t : normalize_tokens(lex.connectives[uniform_index(rng, lex.connectives.size())])) {
        out.push_back(std::move(t));
      }
    }
    out.insert(out.end(), tokens.begin() + static_cast<std::ptrdiff_t>(end), tokens.end());
    tokens = std::move(out);
  } else if (dim == "simple") {
    std::vector<std::string> kept;
    for (const auto& t : tokens) {
      if (t.size() <= kSimpleMaxWordLength) {
        kept.push_back(t);
      }
    }
    if (kept.empty()) {
      // Generations must stay non-empty: keep the shortest word.
      kept.push_back(*std::min_element(tokens.begin(), tokens.end(),
                                       [](const auto& a, const auto& b) { return a.size() < b.size(); }));
    }
    tokens = std::move(kept);
  } else if (dim == "technical") {
    insert_terms(tokens, lex.technical, rng);
  } else if (dim == "playful") {
    insert_terms(tokens, lex.playful, rng);
  } else if (dim == "harsh") {
    insert_terms(tokens, lex.harsh, rng);
  } else {
    throw UnknownDimensionError(std::string(dim));
  }
  return join(tokens);
}

ExampleSet synth_corpus(const std::vector<std::string>& seed_texts,
                        const PreferenceRegistry& registry, std::size_t per_dim,
                        std::uint64_t seed, const Lexicons& lex) {
  if (seed_texts.empty()) {
    throw ParameterError("synth_corpus needs seed texts");
  }
  ExampleSet set{{}, registry, seed};
  set.examples.reserve(per_dim * registry.size());
  const std::size_t n = seed_texts.size();
  for (std::size_t d = 0; d < registry.size(); ++d) {
    // One stream per dimension; output order is the serial dimension order.
    Rng rng(derive_seed(seed, d));
    const auto& symbol = registry.at(d).symbol;
    for (std::size_t i = 0; i < per_dim; ++i) {
      const auto p = static_cast<std::size_t>(uniform_index(rng, n));
      const auto& related = seed_texts[(p + 1) % n];
      set.examples.push_back({seed_texts[p], prefguide::transform(related, symbol, rng, lex), symbol});
    }
  }
  return set;
}

std::pair<ExampleSet, ExampleSet> split(const ExampleSet& set, double eval_fraction,
                                        std::uint64_t seed) {
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw ParameterError("eval_fraction must lie in (0, 1)");
  }
  if (set.examples.empty()) {
    throw ParameterError("cannot split an empty example set");
  }
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < set.examples.size(); ++i) {
    by_label[set.examples[i].label].push_back(i);
  }
  Rng rng(seed);
  std::vector<bool> is_eval(set.examples.size(), false);
  // Labels in registry order keep the stream consumption independent of map ordering.
  for (const auto& dim : set.registry.dims()) {
    auto it = by_label.find(dim.symbol);
    if (it == by_label.end()) {
      continue;
    }
    auto idx = it->second;
    shuffle(idx, rng);
    const std::size_t n = idx.size();
    auto n_eval = static_cast<std::size_t>(std::llround(eval_fraction * static_cast<double>(n)));
    n_eval = std::clamp<std::size_t>(n_eval, 1, std::max<std::size_t>(1, n - 1));
    for (std::size_t k = 0; k < n_eval; ++k) {
      is_eval[idx[k]] = true;
    }
  }
  ExampleSet train{{}, set.registry, set.seed};
  ExampleSet eval{{}, set.registry, set.seed};
  for (std::size_t i = 0; i < set.examples.size(); ++i) {
    (is_eval[i] ? eval : train).examples.push_back(set.examples[i]);
  }
  return {std::move(train), std::move(eval)};
}

void write_examples(std::ostream& out, const ExampleSet& set) {
  for (const auto& ex : set.examples) {
    nlohmann::ordered_json j;
    j["prompt"] = ex.prompt;
    j["generation"] = ex.generation;
    j["label"] = ex.label;
    out << j.dump() << '\n';
  }
}

void write_examples(const std::filesystem::path& path, const ExampleSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  write_examples(out, set);
}

ExampleSet read_examples(std::istream& in, const PreferenceRegistry& registry) {
  ExampleSet set{{}, registry, 0};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    try {
      const auto j = nlohmann::json::parse(line);
      Example ex{j.at("prompt").get<std::string>(), j.at("generation").get<std::string>(),
                 j.at("label").get<std::string>()};
      registry.index_of(ex.label);
      if (ex.generation.empty()) {
        throw ParameterError("empty generation");
      }
      set.examples.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw Error("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return set;
}

ExampleSet read_examples(const std::filesystem::path& path, const PreferenceRegistry& registry) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open " + path.string());
  }
  return read_examples(in, registry);
}

}  // namespace prefguide
