#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kgqa {

/// Lowercases and splits on anything that is not an ASCII letter or digit.
/// Bytes >= 0x80 are kept inside tokens so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

/// Tokenizes `text` and drops every token span equal to a tokenized mention
/// (longest mention first at each position). If nothing would remain, the
/// unmasked tokens are returned instead.
std::vector<std::string> tokenize_and_mask(std::string_view text,
                                           std::span<const std::string> mentions);

}  // namespace kgqa
