// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace stagecraft::detail {

std::string trim(std::string_view text);
std::string lower(std::string_view text);
std::string collapse_whitespace(std::string_view text);
std::vector<std::string> words(std::string_view text);  // lowercase alphabetic runs
std::string strip_article(std::string_view phrase);
bool starts_with_ci(std::string_view text, std::string_view prefix);

}  // namespace stagecraft::detail
