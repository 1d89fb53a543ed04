#pragma once

// Structural helpers for model output that wraps JSON in prose or fences.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vivecap::detail {

struct Unfenced {
  std::string_view body;
  std::size_t offset = 0;  // where body starts inside the original text
};

/// Strips surrounding whitespace and one pair of ``` fences (with an optional
/// language tag on the opening line).
Unfenced strip_code_fences(std::string_view text);

/// Index one past the bracket matching text[open] ('{' or '['), honouring
/// string literals. nullopt when unbalanced.
std::optional<std::size_t> matching_bracket(std::string_view text, std::size_t open);

/// Offset of the value addressed by `path` (object keys only) inside a
/// syntactically valid JSON document, or of the deepest prefix found.
std::size_t value_offset(std::string_view json, const std::vector<std::string>& path);

/// Offset of the second occurrence of `key` inside the object at `path`, if
/// the object repeats a key.
std::optional<std::pair<std::string, std::size_t>> duplicate_key(std::string_view json,
                                                                  const std::vector<std::string>& path);

}  // namespace vivecap::detail
