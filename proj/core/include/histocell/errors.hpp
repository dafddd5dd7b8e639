#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace histocell {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file violates its declared schema. `line` is 1-based; 0 means the
/// problem concerns the file as a whole.
class SchemaError : public Error {
 public:
  SchemaError(std::string file, std::size_t line, const std::string& message);

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string file_;
  std::size_t line_;
  std::string message_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or could not start.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace histocell
