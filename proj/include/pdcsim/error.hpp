// Copyright 2026 The pdcsim Authors
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

namespace pdcsim {

enum class ErrorKind {
    domain,           // argument outside the mathematical domain of an operation
    contract,         // caller broke a precondition (shapes, unitarity, ...)
    config,           // configuration file or override is invalid
    numerical,        // integration blew up, matrix not positive definite, ...
    gain_too_low,     // click probabilities underflow
    no_intersection,  // g2 isolines do not cross inside the forward grid
    ambiguity,        // several well-separated loss estimates fit the data
    io,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace pdcsim
