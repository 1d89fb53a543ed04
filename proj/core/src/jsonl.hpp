#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "vivecap/error.hpp"

namespace vivecap::detail {

/// Calls fn(line_number, json) for every non-blank line. Parse failures are
/// reported through on_error(line_number, message), which must throw.
template <typename Fn, typename OnError>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn, OnError&& on_error) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open file");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      on_error(line_no, std::string("invalid JSON: ") + e.what());
    }
    fn(line_no, j);
  }
}

}  // namespace vivecap::detail
