// Copyright 2026 The Optic Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>

namespace optic {

/// Tag wrapper used to construct the error alternative of a Result.
template <typename E>
struct Failure {
  E error;
};

template <typename E>
Failure<std::decay_t<E>> fail(E&& error) {
  return {std::forward<E>(error)};
}

/// Value-or-error. A stand-in for std::expected, which C++20 lacks.
///
/// Accessing the wrong alternative throws std::logic_error; callers are
/// expected to branch on has_value() first.
template <typename T, typename E>
class Result {
 public:
  using value_type = T;
  using error_type = E;

  Result(T value) : storage_(std::in_place_index<0>, std::move(value)) {}  // NOLINT
  template <typename U>
  Result(Failure<U> f)  // NOLINT
      : storage_(std::in_place_index<1>, E(std::move(f.error))) {}

  bool has_value() const noexcept { return storage_.index() == 0; }
  explicit operator bool() const noexcept { return has_value(); }

  T& value() & {
    check_value();
    return std::get<0>(storage_);
  }
  const T& value() const& {
    check_value();
    return std::get<0>(storage_);
  }
  T&& value() && {
    check_value();
    return std::get<0>(std::move(storage_));
  }

  const E& error() const& {
    if (has_value()) throw std::logic_error("Result holds a value, not an error");
    return std::get<1>(storage_);
  }
  E&& error() && {
    if (has_value()) throw std::logic_error("Result holds a value, not an error");
    return std::get<1>(std::move(storage_));
  }

  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }
  T& operator*() & { return value(); }
  const T& operator*() const& { return value(); }

 private:
  void check_value() const {
    if (!has_value()) throw std::logic_error("Result holds an error, not a value");
  }

  std::variant<T, E> storage_;
};

}  // namespace optic
