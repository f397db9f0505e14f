// Copyright 2026 The cytocascade Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace cyto {

// Base for every error raised by the library. Callers that only care about
// "something went wrong" catch this; the subclasses exist for the cases the
// CLI reports differently.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class OutOfBoundsError : public Error {
 public:
  using Error::Error;
};

// Raised when a slide yields no region the detector considers informative.
class NonDiagnosticError : public Error {
 public:
  using Error::Error;
};

#define CYTO_CHECK(cond, ErrType, msg)                 \
  do {                                                 \
    if (!(cond)) throw ::cyto::ErrType(std::string(msg)); \
  } while (0)

}  // namespace cyto
