/* Copyright 2026 The waspseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>

namespace waspseg {

// Base class for every error raised by the library. The subclasses map onto
// the command-line exit codes (see exit_code()).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration, unknown keys, bad architecture parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent data: files, shapes, label maps.
class DataError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

// NaN/Inf encountered, training divergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// 0 success, 1 config error, 2 data error, 3 numerical failure.
int exit_code(const std::exception& e) noexcept;

}  // namespace waspseg
