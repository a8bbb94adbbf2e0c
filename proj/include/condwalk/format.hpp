#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace condwalk {

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

/// Fixed number of significant digits (%.{digits}g).
std::string format_double(double v, int digits);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view data);

/// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_escape(std::string_view field);

}  // namespace condwalk
