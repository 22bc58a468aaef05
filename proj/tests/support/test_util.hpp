#pragma once

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "fuzzyjoin/error.hpp"

namespace fuzzyjoin::testing {

/// Code of the Error thrown by fn; records a failure if nothing is thrown.
template <class Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected fuzzyjoin::Error";
  return ErrorCode::IoError;
}

/// Central difference of f with respect to x[i].
inline double central_difference(const std::function<double()>& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2 * h);
}

/// |a - b| / max(1, |a|, |b|).
inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace fuzzyjoin::testing
