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

#pragma once

#include <stdexcept>
#include <string>

namespace hapbeam {

enum class ErrorKind {
    invalid_argument,
    degenerate_attitude,
    ambiguous_axis,
    config,
    parse,
    range,
    uncovered_slot,
    out_of_model,
    insufficient_data,
    invariant_violation,
    io,
};

const char* to_string(ErrorKind kind);

/// Library error. Every failure raised by hapbeam carries a kind so the CLI
/// can map it onto a stable exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Relative rotation too close to pi for the axis to be determined. The
/// rotation angle is still available.
class AmbiguousAxisError : public Error {
public:
    explicit AmbiguousAxisError(double angle);
    double angle() const noexcept { return angle_; }

private:
    double angle_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

// 0 success, 2 config, 3 data, 4 internal invariant.
int exit_code_for(ErrorKind kind);

}  // namespace hapbeam
