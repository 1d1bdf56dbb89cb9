#include "tep/text.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

#include "tep/random.hpp"

namespace tep {

std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  if (hi <= lo) return lo;
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1u;
  if (span == 0) return static_cast<std::int64_t>(rng());  // full 64-bit range
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return lo + static_cast<std::int64_t>(draw % span);
}

}  // namespace tep

namespace tep::text {

namespace {

bool is_header_line(std::string_view line) {
  if (line.size() < 3 || line.front() != '[' || line.back() != ']') return false;
  if (!std::isalpha(static_cast<unsigned char>(line[1]))) return false;
  for (char c : line.substr(1, line.size() - 2)) {
    const auto u = static_cast<unsigned char>(c);
    if (!(std::isalnum(u) || c == ' ' || c == '_' || c == '-' || c == '.' || c == ':')) return false;
  }
  return true;
}

// Iterates lines as [begin, end) offsets excluding the newline.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    if (!fn(pos, nl)) return;
    if (nl == text.size()) return;
    pos = nl + 1;
  }
}

std::vector<std::string_view> collect(std::string_view text, std::string_view name, bool first_only) {
  std::vector<std::string_view> out;
  const std::string header = "[" + std::string(name) + "]";
  std::size_t body_begin = std::string_view::npos;
  for_each_line(text, [&](std::size_t b, std::size_t e) {
    const std::string_view line = text.substr(b, e - b);
    if (is_header_line(line)) {
      if (body_begin != std::string_view::npos) {
        std::size_t end = b > body_begin ? b - 1 : body_begin;
        out.push_back(text.substr(body_begin, end - body_begin));
        body_begin = std::string_view::npos;
        if (first_only) return false;
      }
      if (line == header) body_begin = std::min(e + 1, text.size());
    }
    return true;
  });
  if (body_begin != std::string_view::npos) {
    std::string_view body = text.substr(body_begin);
    if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
    out.push_back(body);
  }
  return out;
}

}  // namespace

std::string section(std::string_view name, std::string_view body) {
  std::string out;
  out.reserve(name.size() + body.size() + 4);
  out += '[';
  out += name;
  out += "]\n";
  out += body;
  out += '\n';
  return out;
}

std::optional<std::string_view> find_section(std::string_view text, std::string_view name) {
  auto all = collect(text, name, true);
  if (all.empty()) return std::nullopt;
  return all.front();
}

std::vector<std::string_view> find_sections(std::string_view text, std::string_view name) {
  return collect(text, name, false);
}

std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view first_line(std::string_view s) noexcept {
  return s.substr(0, std::min(s.find('\n'), s.size()));
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) noexcept {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::string pad_words(std::size_t n) {
  std::string out;
  out.reserve(n * 4);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += "pad";
  }
  return out;
}

}  // namespace tep::text
