#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vivecap/error.hpp"

namespace vivecap {

class RosterError : public Error {
 public:
  using Error::Error;
};

/// The closed universe of valid character names for a corpus.
///
/// Names keep the spelling given at construction. Lookups are
/// case-insensitive (ASCII folding) and underscores are significant, so
/// "elder_sprite" resolves to "Elder_Sprite" but "Elder Sprite" does not.
class Roster {
 public:
  /// Throws RosterError when empty, when a name is blank, or when two names
  /// collide after case folding.
  explicit Roster(std::vector<std::string> names);

  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return names_.size(); }

  /// Roster spelling of `name`, or nullopt when it is not a member.
  std::optional<std::string> canonical(std::string_view name) const;
  bool contains(std::string_view name) const { return canonical(name).has_value(); }

 private:
  std::vector<std::string> names_;
  std::vector<std::string> folded_;
};

/// Reads a JSON array of names, e.g. ["Ellie", "Jay"].
Roster load_roster(const std::filesystem::path& path);

std::string fold_case(std::string_view s);

}  // namespace vivecap
