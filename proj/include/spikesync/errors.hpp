#pragma once

#include <stdexcept>
#include <string>

namespace spikesync {

/// Bad input: malformed files, shape mismatches, out-of-domain parameters.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not produce a usable result (failed
/// factorization, non-finite likelihood at a state that must be finite).
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

} // namespace spikesync
