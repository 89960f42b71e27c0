#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rdq {

// Argument outside an operation's domain (bad probability, empty grid, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// An iterative solver produced a non-finite objective. The message carries
// the tail of the iteration trace.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed wire data. offset is the byte position of the first violation.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at byte offset " + std::to_string(offset)),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace rdq
