#pragma once

#include <stdexcept>
#include <string>

namespace weft {

/// Out-of-range component, lane, cell or cursor reach.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Invalid tensor / executor / benchmark configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Graph construction failure (frozen graph, mismatched block grids, cycles).
class BuildError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// API used in a state that does not allow it.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ArenaExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by numerical kernels when a state leaves the admissible set
/// (e.g. nonpositive density or pressure).
class NumericalDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class StaleResultError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace weft
