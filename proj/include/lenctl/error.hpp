// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace lenctl {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument is outside the domain of the operation (zero target, negative count, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A byte stream is not valid UTF-8 where validity is required.
class EncodingError : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked in a state that does not permit it.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Transport failure, malformed frame, bad status or idle timeout from a generation backend.
class BackendError : public Error {
 public:
  using Error::Error;
};

/// Model output or an input file could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace lenctl
