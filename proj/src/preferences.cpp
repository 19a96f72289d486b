// SPDX-License-Identifier: Apache-2.0
#include "prefguide/preferences.hpp"

#include <map>
#include <set>

#include "prefguide/error.hpp"

namespace prefguide {

char polarity_char(Polarity p) { return p == Polarity::kPositive ? '+' : '-'; }

PreferenceRegistry::PreferenceRegistry(std::vector<Dimension> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) {
    throw ParameterError("registry needs at least one dimension");
  }
  std::set<std::string> symbols;
  std::map<int, std::pair<int, int>> pair_members;  // pair_id -> (#positive, #negative)
  for (const auto& d : dims_) {
    if (d.symbol.empty() || !symbols.insert(d.symbol).second) {
      throw ParameterError("dimension symbols must be non-empty and unique: '" + d.symbol + "'");
    }
    auto& [pos, neg] = pair_members[d.pair_id];
    (d.polarity == Polarity::kPositive ? pos : neg) += 1;
  }
  for (const auto& [id, members] : pair_members) {
    if (members.first != 1 || members.second != 1) {
      throw ParameterError("pair " + std::to_string(id) + " must have one + and one - member");
    }
  }
}

std::optional<std::size_t> PreferenceRegistry::find(std::string_view symbol) const {
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (dims_[i].symbol == symbol) {
      return i;
    }
  }
  return std::nullopt;
}

std::size_t PreferenceRegistry::index_of(std::string_view symbol) const {
  if (auto i = find(symbol)) {
    return *i;
  }
  throw UnknownDimensionError(std::string(symbol));
}

std::size_t PreferenceRegistry::opposite_of(std::size_t index) const {
  const auto& d = dims_.at(index);
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i != index && dims_[i].pair_id == d.pair_id) {
      return i;
    }
  }
  throw ParameterError("dimension without an opposite: " + d.symbol);
}

const PreferenceRegistry& default_registry() {
  static const PreferenceRegistry registry({
      {"simple", "audience: simple (D1A)", 1, Polarity::kPositive},
      {"technical", "audience: technical (D1B)", 1, Polarity::kNegative},
      {"concise", "content density: concise (D2A)", 2, Polarity::kPositive},
      {"verbose", "content density: verbose (D2B)", 2, Polarity::kNegative},
      {"playful", "tone: playful (D3A)", 3, Polarity::kPositive},
      {"harsh", "tone: harsh (D3B)", 3, Polarity::kNegative},
  });
  return registry;
}

}  // namespace prefguide
