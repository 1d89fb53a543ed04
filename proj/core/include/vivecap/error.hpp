#pragma once

#include <stdexcept>
#include <string>

namespace vivecap {

// Base of every exception thrown by the library. Each module derives its own
// error type carrying a kind enum plus whatever context it can retain.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  IoError(std::string path, const std::string& what)
      : Error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace vivecap
