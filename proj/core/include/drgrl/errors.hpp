#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace drgrl {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyCodeError : public Error {
 public:
  explicit EmptyCodeError(std::size_t line = 0)
      : Error(line == 0 ? "empty DRG code"
                        : "empty DRG code at line " + std::to_string(line)),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DuplicateCodeError : public Error {
 public:
  DuplicateCodeError(const std::string& code, std::size_t line)
      : Error("duplicate DRG code '" + code + "'" +
              (line == 0 ? std::string() : " at line " + std::to_string(line))),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ReferenceNotInCatalogError : public Error {
 public:
  explicit ReferenceNotInCatalogError(const std::string& code)
      : Error("reference code not in catalog: '" + code + "'") {}
};

class TokenOutOfRangeError : public Error {
 public:
  using Error::Error;
};

class UnknownConditionError : public Error {
 public:
  using Error::Error;
};

class MalformedNoteError : public Error {
 public:
  using Error::Error;
};

class EmptyGroupError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace drgrl
