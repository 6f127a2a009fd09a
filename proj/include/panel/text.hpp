#pragma once

#include <string>
#include <string_view>
#include <vector>

// Small ASCII string helpers shared across modules.
namespace panel::text {

std::string_view trim(std::string_view s) noexcept;
std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
// trim + ASCII case-fold; the comparison key for label aliases and lookups.
std::string fold(std::string_view s);
bool iequals(std::string_view a, std::string_view b) noexcept;
bool starts_with_icase(std::string_view s, std::string_view prefix) noexcept;
std::vector<std::string> split(std::string_view s, char sep);

}  // namespace panel::text
