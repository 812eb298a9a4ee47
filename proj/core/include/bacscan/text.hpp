#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bacscan::text {

std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool icontains(std::string_view haystack, std::string_view needle);
bool istarts_with(std::string_view s, std::string_view prefix);
std::string_view trim(std::string_view s);

bool is_decimal_digits(std::string_view s);

// Decodes UTF-8 into Unicode scalar values. Each byte of an invalid sequence
// maps to a private value above U+10FFFF so decoding is lossless.
std::vector<char32_t> decode_utf8(std::string_view s);

// Byte offset where each decoded scalar value starts, followed by s.size().
std::vector<std::size_t> utf8_offsets(std::string_view s);

// Number of scalar values decode_utf8 would produce.
std::size_t utf8_length(std::string_view s);

// Prefix of `s` holding at most `max_chars` scalar values.
std::string truncate_utf8(std::string_view s, std::size_t max_chars);

bool is_valid_utf8(std::string_view s);

std::string base64_encode(std::string_view bytes);
// Throws bacscan::ParseError on malformed input. Whitespace is ignored.
std::string base64_decode(std::string_view encoded);

}  // namespace bacscan::text

namespace bacscan::text {

// RFC 4180 field quoting: fields containing a comma, quote, CR or LF are
// wrapped in quotes with embedded quotes doubled.
std::string csv_field(std::string_view field);
std::string csv_row(const std::vector<std::string>& fields);

// Fixed-point rendering with `digits` decimals, independent of locale.
std::string format_fixed(double value, int digits);

}  // namespace bacscan::text
