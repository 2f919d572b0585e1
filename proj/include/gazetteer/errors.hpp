#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gazetteer {

// Network-level failure (connection refused, timeout, HTTP 429/5xx after
// retries). Callers may retry.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The remote side answered but the answer is unusable: malformed body,
// unexpected status, or a replay-cache miss. Retrying will not help.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. `line()` is 1-based, 0 when not line-oriented.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what
                                : what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace gazetteer
