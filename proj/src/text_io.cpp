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

#include "hapbeam/detail/text_io.hpp"

#include "hapbeam/error.hpp"
#include "hapbeam/geometry.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hapbeam::detail {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view token, const std::string& where) {
    token = trim(token);
    double v = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (!token.empty() && *first == '+') ++first;
    auto res = std::from_chars(first, last, v);
    if (token.empty() || res.ec != std::errc() || res.ptr != last)
        fail(ErrorKind::parse, where + ": expected a number, got '" + std::string(token) + "'");
    return v;
}

long long parse_int(std::string_view token, const std::string& where) {
    token = trim(token);
    long long v = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (token.empty() || res.ec != std::errc() || res.ptr != token.data() + token.size())
        fail(ErrorKind::parse, where + ": expected an integer, got '" + std::string(token) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

double disk_degrees_to_radians(double deg) { return deg * (kPi / 180.0); }

double radians_to_disk_degrees(double rad) {
    const double guess = rad * (180.0 / kPi);
    if (!std::isfinite(guess) || disk_degrees_to_radians(guess) == rad) return guess;
    double up = guess, down = guess;
    for (int i = 0; i < 8; ++i) {
        up = std::nextafter(up, INFINITY);
        down = std::nextafter(down, -INFINITY);
        if (disk_degrees_to_radians(up) == rad) return up;
        if (disk_degrees_to_radians(down) == rad) return down;
    }
    return guess;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "' for reading");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) fail(ErrorKind::io, "write to '" + path.string() + "' failed");
}

}  // namespace hapbeam::detail
