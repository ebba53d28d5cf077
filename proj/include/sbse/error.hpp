// Copyright 2026 The SBSE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace sbse {

// Root of the library's error taxonomy. The CLI maps subclasses onto process
// exit codes: ConfigError -> 2, IoError -> 3, everything else -> 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File exists but its contents are not a supported format (wrong channel
// count, sample rate, encoding, bad magic, ...). The message names the
// offending property.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Filesystem-level failure: missing file, truncated read, unwritable path.
class IoError : public Error {
 public:
  using Error::Error;
};

// Operands have incompatible or degenerate dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid parameter combination in a config or constructor argument.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Scalar argument outside its valid range (e.g. querying t outside the grid).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Non-finite value where a finite one is required, or an evaluation that
// would be singular (division by sigma = 0).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Input is structurally valid but carries no usable signal (zero power).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// An iterative computation produced non-finite values; message reports where.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// An aggregation step is missing required inputs; message lists them.
class CompletenessError : public Error {
 public:
  using Error::Error;
};

// Persisted artifact (checkpoint) does not match the expected version/arch.
class VersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace sbse
