#ifndef KOLMO_ERROR_HPP_
#define KOLMO_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace kolmo {

// Invalid input or configuration (maps to CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Overflow, divergence or other non-finite state (maps to CLI exit code 3).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ConfigError(what);
}

}  // namespace kolmo

#endif  // KOLMO_ERROR_HPP_
