#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ajtwin {

// One `key = value unit` line of a configuration file.
struct ConfigEntry {
  std::string key;
  std::string value;
  std::string unit;
  int line = 0;
};

// Parses flat configuration text. Blank lines and `#` comments are skipped.
// Throws Error(invalid_input) on malformed lines or duplicate keys.
std::vector<ConfigEntry> parse_config(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

// Shortest decimal form that reads back to the same double.
std::string format_double(double value);
// Strict parse of a whole token; throws Error(invalid_input).
double parse_double(std::string_view token);

}  // namespace ajtwin
