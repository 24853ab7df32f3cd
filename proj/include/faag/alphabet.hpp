#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace faag {

// 'a'..'z' and space; the CTC blank sits after the last symbol.
class Alphabet {
 public:
  static constexpr std::string_view kSymbols = "abcdefghijklmnopqrstuvwxyz ";
  static constexpr int kSymbolCount = 27;
  static constexpr int kBlank = 27;
  static constexpr int kClassCount = 28;

  static bool contains(char c);
  static int index_of(char c);  // throws InvalidInput for characters outside the alphabet
  static char symbol(int index);

  // Text -> label indices. Throws InvalidInput on characters outside a-z/space.
  static std::vector<int> encode(std::string_view text);
  static std::string decode(std::span<const int> labels);
};

// True when text is non-empty and only uses a-z and space.
bool is_valid_transcript(std::string_view text);

}  // namespace faag
