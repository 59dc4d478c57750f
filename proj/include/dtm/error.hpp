#pragma once

#include <stdexcept>
#include <string>

namespace dtm {

// Failure classes. The CLI maps each to a distinct exit code.
enum class ErrorKind { Config, Data, Format, Parse, State, Numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};
struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& what) : Error(ErrorKind::Format, what) {}
};
struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error(ErrorKind::Parse, what) {}
};
struct StateError : Error {
  explicit StateError(const std::string& what) : Error(ErrorKind::State, what) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

}  // namespace dtm
