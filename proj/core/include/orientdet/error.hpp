#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace orientdet {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-positive or non-finite box fields.
class InvalidBoxError : public Error {
 public:
  using Error::Error;
};

// Degenerate (zero-area) polygon where a proper one is required.
class ZeroAreaError : public Error {
 public:
  using Error::Error;
};

// Tensor/grid dimensions that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// Text or binary input that cannot be decoded. Line and column are 1-based;
// zero means "not applicable".
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line = 0, std::size_t column = 0)
      : Error(Format(message, line, column)), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string Format(const std::string& message, std::size_t line, std::size_t column) {
    if (line == 0) return message;
    std::string out = "line " + std::to_string(line);
    if (column != 0) out += ", column " + std::to_string(column);
    return out + ": " + message;
  }

  std::size_t line_;
  std::size_t column_;
};

}  // namespace orientdet
