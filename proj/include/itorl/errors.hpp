// Copyright 2026 The ItorL Authors
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

namespace itorl {

/// Invalid dimensions, hyperparameters or config files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed call arguments (NaN, out-of-range actions, empty demos).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A query position lies inside walls or obstacles.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PlanningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DemoTooLongError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace itorl
