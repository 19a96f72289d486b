// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace prefguide {

enum class Polarity { kPositive, kNegative };

char polarity_char(Polarity p);

struct Dimension {
  std::string symbol;  // e.g. "concise"
  std::string name;    // human-readable label
  int pair_id = 0;
  Polarity polarity = Polarity::kPositive;

  bool operator==(const Dimension&) const = default;
};

// The ordered set of preference dimensions. Column c of the classifier
// matrix corresponds to dims()[c].
class PreferenceRegistry {
 public:
  explicit PreferenceRegistry(std::vector<Dimension> dims);

  std::size_t size() const noexcept { return dims_.size(); }
  const std::vector<Dimension>& dims() const noexcept { return dims_; }
  const Dimension& at(std::size_t index) const { return dims_.at(index); }

  std::optional<std::size_t> find(std::string_view symbol) const;
  // Throws UnknownDimensionError.
  std::size_t index_of(std::string_view symbol) const;
  // Index of the other member of the dimension's opposing pair.
  std::size_t opposite_of(std::size_t index) const;

  bool operator==(const PreferenceRegistry&) const = default;

 private:
  std::vector<Dimension> dims_;
};

// Six dimensions in three opposing pairs:
//   1 audience: simple(+) / technical(-)
//   2 density:  concise(+) / verbose(-)
//   3 tone:     playful(+) / harsh(-)
const PreferenceRegistry& default_registry();

}  // namespace prefguide
