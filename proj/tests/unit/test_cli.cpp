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

#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "hapbeam_test_cli";

int cli(const std::string& args) {
    const std::string cmd = std::string(HAPBEAM_CLI_PATH) + " " + args + " > " + (kDir / "last.log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream os(p);
    os << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kSmall = R"({
  "users": {"count": 4},
  "array": {"mx": 8, "my": 8},
  "calibration": {"box_grid": 5},
  "run": {"snapshots": 8, "series_length": 1200, "threads": 2}
})";

struct Fixture {
    Fixture() {
        fs::remove_all(kDir);
        fs::create_directories(kDir);
        write(kDir / "small.json", kSmall);
    }
};

}  // namespace

TEST_CASE_FIXTURE(Fixture, "usage errors exit 2") {
    CHECK(cli("") == 2);
    CHECK(cli("frobnicate") == 2);
    CHECK(cli("run") == 2);  // --out is required
    write(kDir / "bad.json", R"({"users": {"count": 4, "colour": "red"}})");
    CHECK(cli("run --config " + (kDir / "bad.json").string() + " --out " + (kDir / "o").string()) == 2);
    CHECK(slurp(kDir / "last.log").find("colour") != std::string::npos);
    CHECK(cli("run --config " + (kDir / "missing.json").string() + " --out " + (kDir / "o").string()) == 3);
}

TEST_CASE_FIXTURE(Fixture, "data errors exit 3") {
    write(kDir / "garbage.csv", "t,yaw_deg,pitch_deg,roll_deg\n0,1,2\n");
    CHECK(cli("calibrate --telemetry " + (kDir / "garbage.csv").string()) == 3);
    CHECK(slurp(kDir / "last.log").find("row 2") != std::string::npos);
    CHECK(cli("calibrate --telemetry " + (kDir / "nope.csv").string()) == 3);
}

TEST_CASE_FIXTURE(Fixture, "telemetry, calibration and forecast evaluation") {
    const fs::path tele = kDir / "tele.csv";
    REQUIRE(cli("gen-telemetry --out " + tele.string() + " --length 1500 --seed 5") == 0);
    const fs::path cal = kDir / "cal.txt";
    CHECK(cli("calibrate --telemetry " + tele.string() + " --forecaster persistence --out " + cal.string()) == 0);
    CHECK(slurp(cal).find("delta_omega") != std::string::npos);
    const fs::path rep = kDir / "fe.json";
    CHECK(cli("forecast-eval --telemetry " + tele.string() + " --forecaster linear --out " + rep.string()) == 0);
    CHECK(slurp(rep).find("\"target\"") != std::string::npos);
}

TEST_CASE_FIXTURE(Fixture, "run is deterministic and sweep writes a table") {
    const std::string cfg = (kDir / "small.json").string();
    REQUIRE(cli("run --config " + cfg + " --out " + (kDir / "a").string()) == 0);
    REQUIRE(cli("run --config " + cfg + " --out " + (kDir / "b").string() + " --threads 1") == 0);
    CHECK(slurp(kDir / "a" / "snapshots.csv") == slurp(kDir / "b" / "snapshots.csv"));
    CHECK(fs::exists(kDir / "a" / "summary.json"));
    CHECK(fs::exists(kDir / "a" / "calibration.txt"));

    CHECK(cli("sweep --config " + cfg + " --axis qos.r_min=1,3 --out " + (kDir / "s").string()) == 0);
    CHECK(fs::exists(kDir / "s" / "sweep.csv"));
    CHECK(cli("sweep --config " + cfg + " --axis qos.nothing=1 --out " + (kDir / "s2").string()) == 2);
}
