#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Helpers for the labelled-section layout used by every request the library
// composes. A section starts with a line "[Name]" and runs until the next
// header line or the end of the text.
namespace tep::text {

std::string section(std::string_view name, std::string_view body);

/// Body of the first section called `name`, without the trailing newline.
std::optional<std::string_view> find_section(std::string_view text, std::string_view name);

/// Bodies of every section called `name`, in order.
std::vector<std::string_view> find_sections(std::string_view text, std::string_view name);

std::string_view trim(std::string_view s) noexcept;
std::string to_lower(std::string_view s);
std::string_view first_line(std::string_view s) noexcept;
std::size_t count_occurrences(std::string_view haystack, std::string_view needle) noexcept;

/// `n` filler words ("pad pad ...").
std::string pad_words(std::size_t n);

}  // namespace tep::text
