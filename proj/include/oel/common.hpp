#pragma once

#include <stdexcept>
#include <string>

namespace oel {

inline const char* version() { return OEL_VERSION; }

/// Malformed input file (bad magic, truncated payload, count mismatch).
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// A requested tensor would exceed the configured memory budget.
class ResourceError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace oel
