#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qarank {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input. Carries the 1-based line number when it comes from a file.
class ParseError : public Error {
  public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line)
    {}
    explicit ParseError(const std::string& what) : Error(what) {}

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_ = 0;
};

/// Well-formed input that violates a data invariant (duplicate ids, rank gaps, ...).
class IntegrityError : public Error {
  public:
    using Error::Error;
};

/// Scorer wire protocol violation or transport failure.
class ProtocolError : public Error {
  public:
    using Error::Error;
};

/// Invalid configuration or arguments.
class ConfigError : public Error {
  public:
    using Error::Error;
};

}  // namespace qarank
