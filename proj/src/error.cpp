// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hapbeam/error.hpp"

#include <sstream>

namespace hapbeam {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid-argument";
        case ErrorKind::degenerate_attitude: return "degenerate-attitude";
        case ErrorKind::ambiguous_axis: return "ambiguous-axis";
        case ErrorKind::config: return "config";
        case ErrorKind::parse: return "parse";
        case ErrorKind::range: return "range";
        case ErrorKind::uncovered_slot: return "uncovered-slot";
        case ErrorKind::out_of_model: return "out-of-model";
        case ErrorKind::insufficient_data: return "insufficient-data";
        case ErrorKind::invariant_violation: return "invariant-violation";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

namespace {
std::string ambiguous_message(double angle) {
    std::ostringstream os;
    os.precision(17);
    os << "relative rotation angle " << angle << " rad is within 1e-9 of pi; axis is ambiguous";
    return os.str();
}
}  // namespace

AmbiguousAxisError::AmbiguousAxisError(double angle)
    : Error(ErrorKind::ambiguous_axis, ambiguous_message(angle)), angle_(angle) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config:
        case ErrorKind::invalid_argument:
            return 2;
        case ErrorKind::parse:
        case ErrorKind::range:
        case ErrorKind::io:
        case ErrorKind::insufficient_data:
        case ErrorKind::degenerate_attitude:
        case ErrorKind::ambiguous_axis:
        case ErrorKind::uncovered_slot:
        case ErrorKind::out_of_model:
            return 3;
        case ErrorKind::invariant_violation:
            return 4;
    }
    return 4;
}

}  // namespace hapbeam
