#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace attrevo {

/// Items of every numbered ("1." / "2)") or bulleted ("-", "*", "•") line,
/// in order, with the marker stripped. Other lines are ignored.
std::vector<std::string> extract_list_items(std::string_view text);

/// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string_view> split_lines(std::string_view text);

std::string_view trim(std::string_view s) noexcept;

}  // namespace attrevo
