#pragma once

#include <stdexcept>
#include <string>

namespace pja {

// Error taxonomy mirrors the CLI exit codes: domain -> 2, io -> 3, degenerate -> 4.
struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateError : std::runtime_error {
  explicit DegenerateError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require_domain(bool ok, const std::string& msg) {
  if (!ok) throw DomainError(msg);
}

}  // namespace pja
