#include "json_text.hpp"

#include <cctype>
#include <set>

#include <nlohmann/json.hpp>

namespace vivecap::detail {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

std::size_t skip_ws(std::string_view s, std::size_t i) {
  while (i < s.size() && is_space(s[i])) ++i;
  return i;
}

// s[i] == '"'; returns index one past the closing quote.
std::size_t skip_string(std::string_view s, std::size_t i) {
  ++i;
  while (i < s.size()) {
    if (s[i] == '\\') {
      i += 2;
      continue;
    }
    if (s[i] == '"') return i + 1;
    ++i;
  }
  return s.size();
}

std::size_t skip_value(std::string_view s, std::size_t i) {
  i = skip_ws(s, i);
  if (i >= s.size()) return i;
  if (s[i] == '"') return skip_string(s, i);
  if (s[i] == '{' || s[i] == '[') {
    auto end = matching_bracket(s, i);
    return end ? *end : s.size();
  }
  while (i < s.size() && s[i] != ',' && s[i] != '}' && s[i] != ']' && !is_space(s[i])) ++i;
  return i;
}

std::string decode_key(std::string_view quoted) {
  try {
    return nlohmann::json::parse(quoted).get<std::string>();
  } catch (const nlohmann::json::exception&) {
    return std::string(quoted.substr(1, quoted.size() >= 2 ? quoted.size() - 2 : 0));
  }
}

// Walks the object starting at s[i] == '{' and calls fn(key, key_offset,
// value_offset) for each member until fn returns true.
template <typename Fn>
void for_each_member(std::string_view s, std::size_t i, Fn&& fn) {
  ++i;
  while (true) {
    i = skip_ws(s, i);
    if (i >= s.size() || s[i] != '"') return;
    std::size_t key_start = i;
    std::size_t key_end = skip_string(s, i);
    std::string key = decode_key(s.substr(key_start, key_end - key_start));
    i = skip_ws(s, key_end);
    if (i >= s.size() || s[i] != ':') return;
    std::size_t value_start = skip_ws(s, i + 1);
    if (fn(key, key_start, value_start)) return;
    i = skip_ws(s, skip_value(s, value_start));
    if (i >= s.size() || s[i] != ',') return;
    ++i;
  }
}

// Offset of the object at `path`, or nullopt.
std::optional<std::size_t> object_at(std::string_view json, const std::vector<std::string>& path) {
  std::size_t pos = skip_ws(json, 0);
  for (const auto& segment : path) {
    if (pos >= json.size() || json[pos] != '{') return std::nullopt;
    std::optional<std::size_t> next;
    for_each_member(json, pos, [&](const std::string& key, std::size_t, std::size_t value) {
      if (key == segment) next = value;
      return next.has_value();
    });
    if (!next) return std::nullopt;
    pos = *next;
  }
  if (pos >= json.size() || json[pos] != '{') return std::nullopt;
  return pos;
}

}  // namespace

Unfenced strip_code_fences(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && is_space(text[begin])) ++begin;
  while (end > begin && is_space(text[end - 1])) --end;
  std::string_view t = text.substr(begin, end - begin);
  if (t.size() >= 3 && t.substr(0, 3) == "```") {
    std::size_t nl = t.find('\n');
    if (nl == std::string_view::npos) return {t, begin};
    std::size_t body_begin = nl + 1;
    std::size_t body_end = t.size();
    if (t.size() >= body_begin + 3 && t.substr(t.size() - 3) == "```") body_end = t.size() - 3;
    std::string_view body = t.substr(body_begin, body_end - body_begin);
    std::size_t lead = 0;
    while (lead < body.size() && is_space(body[lead])) ++lead;
    std::size_t trail = body.size();
    while (trail > lead && is_space(body[trail - 1])) --trail;
    return {body.substr(lead, trail - lead), begin + body_begin + lead};
  }
  return {t, begin};
}

std::optional<std::size_t> matching_bracket(std::string_view text, std::size_t open) {
  std::vector<char> stack;
  for (std::size_t i = open; i < text.size(); ++i) {
    char c = text[i];
    if (c == '"') {
      i = skip_string(text, i) - 1;
      continue;
    }
    if (c == '{' || c == '[') {
      stack.push_back(c == '{' ? '}' : ']');
    } else if (c == '}' || c == ']') {
      if (stack.empty() || stack.back() != c) return std::nullopt;
      stack.pop_back();
      if (stack.empty()) return i + 1;
    }
  }
  return std::nullopt;
}

std::size_t value_offset(std::string_view json, const std::vector<std::string>& path) {
  std::size_t pos = skip_ws(json, 0);
  for (const auto& segment : path) {
    if (pos >= json.size() || json[pos] != '{') return pos;
    std::optional<std::size_t> next;
    for_each_member(json, pos, [&](const std::string& key, std::size_t, std::size_t value) {
      if (key == segment) next = value;
      return next.has_value();
    });
    if (!next) return pos;
    pos = *next;
  }
  return pos;
}

std::optional<std::pair<std::string, std::size_t>> duplicate_key(std::string_view json,
                                                                  const std::vector<std::string>& path) {
  auto obj = object_at(json, path);
  if (!obj) return std::nullopt;
  std::set<std::string> seen;
  std::optional<std::pair<std::string, std::size_t>> dup;
  for_each_member(json, *obj, [&](const std::string& key, std::size_t key_offset, std::size_t) {
    if (!seen.insert(key).second) dup = {key, key_offset};
    return dup.has_value();
  });
  return dup;
}

}  // namespace vivecap::detail
