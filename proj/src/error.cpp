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

#include "pdcsim/error.hpp"

namespace pdcsim {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::domain: return "domain error";
        case ErrorKind::contract: return "contract violation";
        case ErrorKind::config: return "config error";
        case ErrorKind::numerical: return "numerical failure";
        case ErrorKind::gain_too_low: return "gain too low";
        case ErrorKind::no_intersection: return "no intersection";
        case ErrorKind::ambiguity: return "ambiguous inversion";
        case ErrorKind::io: return "i/o error";
    }
    return "unknown error";
}

}  // namespace pdcsim
