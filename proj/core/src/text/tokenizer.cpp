#include "kgqa/text/tokenizer.hpp"

#include <algorithm>

namespace kgqa {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool word = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                      c >= 0x80;
    if (word) {
      current.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> tokenize_and_mask(std::string_view text,
                                           std::span<const std::string> mentions) {
  auto tokens = tokenize(text);
  std::vector<std::vector<std::string>> spans;
  for (const auto& m : mentions) {
    auto t = tokenize(m);
    if (!t.empty()) spans.push_back(std::move(t));
  }
  std::stable_sort(spans.begin(), spans.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });

  std::vector<std::string> kept;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t skip = 0;
    for (const auto& s : spans) {
      if (i + s.size() <= tokens.size() && std::equal(s.begin(), s.end(), tokens.begin() + i)) {
        skip = s.size();
        break;
      }
    }
    if (skip > 0) {
      i += skip;
    } else {
      kept.push_back(tokens[i++]);
    }
  }
  return kept.empty() ? tokens : kept;
}

}  // namespace kgqa
