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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hapbeam::detail {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

/// Parses a full token as a double; throws parse error naming `where` on failure.
double parse_double(std::string_view token, const std::string& where);
long long parse_int(std::string_view token, const std::string& where);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

/// Degree value whose conversion back to radians reproduces `rad` exactly,
/// when such a value exists; otherwise the nearest conversion.
double radians_to_disk_degrees(double rad);
double disk_degrees_to_radians(double deg);

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace hapbeam::detail
