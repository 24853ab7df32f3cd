#include "faag/alphabet.hpp"

#include <algorithm>

#include "faag/error.hpp"

namespace faag {

bool Alphabet::contains(char c) { return c == ' ' || (c >= 'a' && c <= 'z'); }

int Alphabet::index_of(char c) {
  if (c == ' ') return 26;
  if (c >= 'a' && c <= 'z') return c - 'a';
  throw Error(ErrorCode::kInvalidInput, std::string("character '") + c + "' is not in the alphabet");
}

char Alphabet::symbol(int index) {
  if (index < 0 || index >= kSymbolCount)
    throw Error(ErrorCode::kInvalidInput, "label " + std::to_string(index) + " has no symbol");
  return kSymbols[static_cast<std::size_t>(index)];
}

std::vector<int> Alphabet::encode(std::string_view text) {
  std::vector<int> labels;
  labels.reserve(text.size());
  for (char c : text) labels.push_back(index_of(c));
  return labels;
}

std::string Alphabet::decode(std::span<const int> labels) {
  std::string text;
  text.reserve(labels.size());
  for (int l : labels) text.push_back(symbol(l));
  return text;
}

bool is_valid_transcript(std::string_view text) {
  return !text.empty() && std::all_of(text.begin(), text.end(), Alphabet::contains);
}

}  // namespace faag
