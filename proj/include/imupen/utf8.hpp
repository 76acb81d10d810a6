#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace imupen::utf8 {

// Splits a UTF-8 string into one std::string per code point. Throws
// EncodingError on malformed input.
std::vector<std::string> split_code_points(std::string_view text);

// Decodes a single-code-point string; throws EncodingError otherwise.
char32_t code_point(std::string_view one_char);

}  // namespace imupen::utf8
