#pragma once

#include <stdexcept>
#include <string>

namespace nnviterbi {

// Decoding found no grammar-accepted segmentation of the input sequence.
class NoPathError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A text format (grammar file, config file, ...) could not be parsed.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// A model was queried for a class it has never been told about.
class UninitializedClassError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A file could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nnviterbi
