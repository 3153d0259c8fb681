#pragma once

#include <stdexcept>
#include <string>

namespace attnlab {

// Non-finite values where finite ones are required (training divergence,
// failed finite-difference probes). Contract violations use
// std::invalid_argument throughout.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace attnlab
