#include "imupen/utf8.hpp"

#include "imupen/errors.hpp"

namespace imupen::utf8 {
namespace {

std::size_t sequence_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 0;
}

}  // namespace

std::vector<std::string> split_code_points(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    const std::size_t n = sequence_length(lead);
    if (n == 0 || i + n > text.size())
      throw EncodingError("malformed UTF-8 at byte " + std::to_string(i));
    for (std::size_t k = 1; k < n; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80)
        throw EncodingError("malformed UTF-8 at byte " + std::to_string(i + k));
    }
    out.emplace_back(text.substr(i, n));
    i += n;
  }
  return out;
}

char32_t code_point(std::string_view one_char) {
  if (one_char.empty()) throw EncodingError("empty symbol");
  const auto lead = static_cast<unsigned char>(one_char[0]);
  const std::size_t n = sequence_length(lead);
  if (n == 0 || n != one_char.size()) throw EncodingError("not a single code point");
  if (n == 1) return lead;
  char32_t cp = lead & (0x7F >> n);
  for (std::size_t k = 1; k < n; ++k) {
    const auto c = static_cast<unsigned char>(one_char[k]);
    if ((c & 0xC0) != 0x80) throw EncodingError("malformed UTF-8 continuation byte");
    cp = (cp << 6) | (c & 0x3F);
  }
  return cp;
}

}  // namespace imupen::utf8
