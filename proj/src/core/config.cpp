#include "ajtwin/core/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "ajtwin/core/error.hpp"

namespace ajtwin {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<ConfigEntry> parse_config(std::string_view text) {
  std::vector<ConfigEntry> entries;
  std::set<std::string, std::less<>> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorKind::invalid_input, "line " + std::to_string(line_no) + ": expected 'key = value unit'");
    ConfigEntry entry;
    entry.line = line_no;
    entry.key = std::string(trim(line.substr(0, eq)));
    std::string_view rhs = trim(line.substr(eq + 1));
    if (entry.key.empty() || rhs.empty())
      throw Error(ErrorKind::invalid_input, "line " + std::to_string(line_no) + ": empty key or value");
    if (const auto space = rhs.find_first_of(" \t"); space != std::string_view::npos) {
      entry.value = std::string(rhs.substr(0, space));
      entry.unit = std::string(trim(rhs.substr(space)));
    } else {
      entry.value = std::string(rhs);
    }
    if (!seen.insert(entry.key).second)
      throw Error(ErrorKind::invalid_input, "line " + std::to_string(line_no) + ": duplicate key '" + entry.key + "'");
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::invalid_input, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::invalid_input, "cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string format_double(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

double parse_double(std::string_view token) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
  if (token.empty() || result.ec != std::errc() || result.ptr != token.data() + token.size())
    throw Error(ErrorKind::invalid_input, "not a number: '" + std::string(token) + "'");
  return value;
}

}  // namespace ajtwin
