#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dwt {

/// Ordered `key = value` pairs.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parses one `key = value` per line; `#` starts a comment, blank lines are
/// skipped. Throws ConfigError naming the line on malformed input or a
/// repeated key.
KeyValues parse_key_values(std::string_view text);

std::string format_key_values(const KeyValues& pairs);

std::size_t parse_size(std::string_view key, std::string_view value);
double parse_real(std::string_view key, std::string_view value);
bool parse_bool(std::string_view key, std::string_view value);

/// Shortest round-trip decimal representation.
std::string format_real(double value);

}  // namespace dwt
