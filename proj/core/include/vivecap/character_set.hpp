#pragma once

#include <initializer_list>
#include <set>
#include <string>
#include <string_view>

#include "vivecap/error.hpp"
#include "vivecap/roster.hpp"

namespace vivecap {

class NonRosterNameError : public Error {
 public:
  explicit NonRosterNameError(std::string name)
      : Error("name is not in the roster: " + name), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

/// A deduplicated set of character names, iterated in byte order.
class CharacterSet {
 public:
  using const_iterator = std::set<std::string>::const_iterator;

  CharacterSet() = default;
  CharacterSet(std::initializer_list<std::string> names) : names_(names) {}
  template <typename It>
  CharacterSet(It first, It last) : names_(first, last) {}

  bool insert(std::string name) { return names_.insert(std::move(name)).second; }
  bool contains(std::string_view name) const { return names_.find(std::string(name)) != names_.end(); }
  std::size_t size() const noexcept { return names_.size(); }
  bool empty() const noexcept { return names_.empty(); }
  const_iterator begin() const { return names_.begin(); }
  const_iterator end() const { return names_.end(); }
  const std::set<std::string>& names() const noexcept { return names_; }

  bool operator==(const CharacterSet&) const = default;

 private:
  std::set<std::string> names_;
};

/// Throws NonRosterNameError on the first name that is not spelled exactly as
/// in the roster.
void require_roster_members(const CharacterSet& set, const Roster& roster);

/// Renders the set as `["A", "B"]`: ascending byte order, ", " separators.
/// This is the detector output contract and the SFT target format.
std::string to_list_literal(const CharacterSet& set);

}  // namespace vivecap
