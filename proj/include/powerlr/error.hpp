// Copyright (c) 2026 The powerlr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace powerlr {

// Error taxonomy. Everything derived from std::logic_error is a caller or
// configuration mistake (the CLI maps it to exit code 2); everything derived
// from std::runtime_error is an environmental failure (exit code 1).

/// Invalid configuration or violated type invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failure to append to a sweep record store. Aborts a sweep.
class StoreWriteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss or parameter.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

}  // namespace detail
}  // namespace powerlr
