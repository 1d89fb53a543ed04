#include "vivecap/roster.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vivecap/character_set.hpp"

namespace vivecap {

std::string fold_case(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
  });
  return out;
}

Roster::Roster(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw RosterError("roster is empty");
  for (const auto& n : names_) {
    if (n.find_first_not_of(" \t\r\n") == std::string::npos) throw RosterError("roster contains a blank name");
    std::string folded = fold_case(n);
    if (std::find(folded_.begin(), folded_.end(), folded) != folded_.end())
      throw RosterError("roster names collide ignoring case: " + n);
    folded_.push_back(std::move(folded));
  }
}

std::optional<std::string> Roster::canonical(std::string_view name) const {
  std::string folded = fold_case(name);
  for (std::size_t i = 0; i < folded_.size(); ++i)
    if (folded_[i] == folded) return names_[i];
  return std::nullopt;
}

Roster load_roster(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open roster");
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw RosterError("roster is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_array()) throw RosterError("roster must be a JSON array of names");
  std::vector<std::string> names;
  for (const auto& v : j) {
    if (!v.is_string()) throw RosterError("roster entries must be strings");
    names.push_back(v.get<std::string>());
  }
  return Roster(std::move(names));
}

void require_roster_members(const CharacterSet& set, const Roster& roster) {
  for (const auto& n : set) {
    auto c = roster.canonical(n);
    if (!c || *c != n) throw NonRosterNameError(n);
  }
}

std::string to_list_literal(const CharacterSet& set) {
  std::string out = "[";
  bool first = true;
  for (const auto& n : set) {
    if (!first) out += ", ";
    first = false;
    out += nlohmann::json(n).dump();
  }
  out += "]";
  return out;
}

}  // namespace vivecap
