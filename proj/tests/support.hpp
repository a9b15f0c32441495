#pragma once

#include <cmath>
#include <functional>
#include <optional>

#include "conebs/errors.hpp"

namespace testing {

inline std::optional<conebs::ErrorKind> error_kind(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const conebs::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace testing

#define CHECK_ERROR_KIND(expr, kind) CHECK(testing::error_kind([&] { (void)(expr); }) == (kind))
