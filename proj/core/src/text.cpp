#include "attrevo/text.hpp"

#include <cctype>

namespace attrevo {

namespace {

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
}

// Length of a list marker at the start of `s`, including the whitespace
// after it, or 0 when the line is not a list item.
std::size_t marker_length(std::string_view s) noexcept {
  std::size_t i = 0;
  if (s.starts_with("\xE2\x80\xA2")) {  // U+2022 bullet
    i = 3;
  } else if (!s.empty() && (s[0] == '-' || s[0] == '*' || s[0] == '+')) {
    i = 1;
  } else {
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i == 0 || i > 3 || i >= s.size() || (s[i] != '.' && s[i] != ')' && s[i] != ':')) {
      return 0;
    }
    ++i;
  }
  if (i >= s.size() || !is_space(s[i])) return 0;
  while (i < s.size() && is_space(s[i])) ++i;
  return i;
}

}  // namespace

std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> extract_list_items(std::string_view text) {
  std::vector<std::string> items;
  for (std::string_view line : split_lines(text)) {
    line = trim(line);
    const std::size_t n = marker_length(line);
    if (n == 0) continue;
    std::string_view item = trim(line.substr(n));
    // Strip markdown emphasis a chat model may wrap around the item.
    while (item.size() >= 2 && item.front() == '*' && item.back() == '*') {
      item = trim(item.substr(1, item.size() - 2));
    }
    if (!item.empty()) items.emplace_back(item);
  }
  return items;
}

}  // namespace attrevo
