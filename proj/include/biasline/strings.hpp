#pragma once

// Small string helpers shared by the loaders.

#include <string>
#include <string_view>
#include <vector>

namespace biasline {

inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = ascii_lower(c);
  return out;
}

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

std::string_view trim(std::string_view s);

/// Collapses each internal whitespace run to one space and trims the ends.
std::string collapse_spaces(std::string_view s);

/// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
/// Returns false on an unterminated quote.
bool split_csv_line(std::string_view line, std::vector<std::string>& fields);

/// Quotes a CSV field when it contains a comma, quote or leading/trailing space.
std::string csv_escape(std::string_view field);

/// Shortest decimal representation that round-trips to the same double.
std::string format_roundtrip(double v);

/// Decimal representation rounded to `digits` significant digits.
std::string format_sig(double v, int digits = 6);

/// Value of `v` after rounding to `digits` significant digits.
double round_sig(double v, int digits = 6);

}  // namespace biasline
