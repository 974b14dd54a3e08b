#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "common/tensor.hpp"

namespace ctig::corpus {

// Character set plus the reserved CTC blank. The blank occupies the last
// index and is never mapped to a text character, so encode/decode round-trips
// losslessly for any string over `symbols`.
class Alphabet {
 public:
  Alphabet() = default;
  static Alphabet from_charset(const std::string& chars);

  int size() const { return static_cast<int>(symbols_.size()) + 1; }
  int blank_index() const { return static_cast<int>(symbols_.size()); }
  const std::string& symbols() const { return symbols_; }

  bool contains(char c) const;
  int index_of(char c) const;  // throws InvalidArg naming the character
  char char_at(int idx) const;

  std::vector<int> encode(const std::string& s) const;
  std::string decode(const std::vector<int>& ids) const;

  nlohmann::ordered_json to_json() const;
  static Alphabet from_json(const nlohmann::ordered_json& j);

  bool operator==(const Alphabet& o) const { return symbols_ == o.symbols_; }

 private:
  std::string symbols_;
  std::vector<int> lut_;  // 256-entry char -> index, -1 if absent
};

// One-hot label matrix T, shape (len(text), alphabet.size()).
Tensor encode_label(const std::string& text, const Alphabet& alphabet);

}  // namespace ctig::corpus
