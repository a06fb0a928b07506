// Copyright 2026 The dialrl Authors. All rights reserved.
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

#ifndef DIALRL_ERRORS_H_
#define DIALRL_ERRORS_H_

#include <stdexcept>
#include <string>

namespace dialrl {

// Base of every error raised by the library. The CLI maps subclasses to exit
// codes, so keep the hierarchy flat.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed structured-text input (ontology, database, corpus, checkpoint).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent configuration, detected before a run starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dimension or architecture mismatch between vectors, nets or layouts.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Value outside the domain of an operation (unknown slot, bad action index).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Operation called in the wrong lifecycle state (step after terminal, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Numerical failure: non-finite gradients, unnormalizable distributions.
class NumericsError : public Error {
 public:
  using Error::Error;
};

}  // namespace dialrl

#endif  // DIALRL_ERRORS_H_
