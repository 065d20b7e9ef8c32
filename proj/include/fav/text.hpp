#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fav {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

// Strict parsers: the whole string must be consumed, otherwise ConfigError.
double parse_double(std::string_view s, std::string_view what);
std::uint64_t parse_u64(std::string_view s, std::string_view what);
bool parse_bool(std::string_view s, std::string_view what);

std::string_view trim(std::string_view s) noexcept;
std::vector<std::string> split(std::string_view s, char sep);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes) noexcept;

}  // namespace fav
