#include "corpus/alphabet.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace ctig::corpus {

Alphabet Alphabet::from_charset(const std::string& chars) {
  if (chars.empty()) throw InvalidArg("alphabet: empty character set");
  Alphabet a;
  a.lut_.assign(256, -1);
  for (char c : chars) {
    auto uc = static_cast<unsigned char>(c);
    if (a.lut_[uc] != -1) throw InvalidArg(std::string("alphabet: duplicate character '") + c + "'");
    a.lut_[uc] = static_cast<int>(a.symbols_.size());
    a.symbols_.push_back(c);
  }
  return a;
}

bool Alphabet::contains(char c) const { return lut_[static_cast<unsigned char>(c)] != -1; }

int Alphabet::index_of(char c) const {
  int i = lut_[static_cast<unsigned char>(c)];
  if (i < 0) throw InvalidArg(std::string("character not in alphabet: '") + c + "'");
  return i;
}

char Alphabet::char_at(int idx) const {
  if (idx < 0 || idx >= static_cast<int>(symbols_.size()))
    throw InvalidArg("alphabet index out of range: " + std::to_string(idx));
  return symbols_[static_cast<size_t>(idx)];
}

std::vector<int> Alphabet::encode(const std::string& s) const {
  std::vector<int> ids;
  ids.reserve(s.size());
  for (char c : s) ids.push_back(index_of(c));
  return ids;
}

std::string Alphabet::decode(const std::vector<int>& ids) const {
  std::string s;
  s.reserve(ids.size());
  for (int i : ids) s.push_back(char_at(i));
  return s;
}

nlohmann::ordered_json Alphabet::to_json() const {
  nlohmann::ordered_json j;
  j["symbols"] = symbols_;
  j["blank_index"] = blank_index();
  j["size"] = size();
  return j;
}

Alphabet Alphabet::from_json(const nlohmann::ordered_json& j) {
  Alphabet a = from_charset(j.at("symbols").get<std::string>());
  if (j.contains("blank_index") && j["blank_index"].get<int>() != a.blank_index())
    throw IoError("alphabet: unsupported blank position in manifest");
  return a;
}

Tensor encode_label(const std::string& text, const Alphabet& alphabet) {
  if (text.empty()) throw InvalidArg("encode_label: empty text");
  Tensor t({static_cast<int64_t>(text.size()), alphabet.size()});
  for (size_t k = 0; k < text.size(); ++k)
    t[static_cast<int64_t>(k) * alphabet.size() + alphabet.index_of(text[k])] = real(1);
  return t;
}

}  // namespace ctig::corpus
