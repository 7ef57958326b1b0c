#pragma once

#include <stdexcept>
#include <string>

namespace inhomo {

// Bad arguments or inconsistent dimensions.
class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// An iterate or integrand became NaN/Inf.
class DivergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

} // namespace detail
} // namespace inhomo
