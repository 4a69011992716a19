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

#include "hapbeam/error.hpp"
#include "hapbeam/harness.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hapbeam;
namespace fs = std::filesystem;

namespace {

ScenarioConfig small_config() {
    ScenarioConfig c;
    c.array.mx = c.array.my = 8;
    c.users = 4;
    c.array.rf_chains = 4;
    c.series_length = 1200;
    c.snapshots = 24;
    c.box_grid = 5;
    c.threads = 2;
    return c;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "hapbeam_test_harness" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("attitude process: constant without excitation, deterministic per seed") {
    AttitudeProcess quiet;
    quiet.amp_pitch_roll_deg = 0.0;
    quiet.amp_yaw_deg = 0.0;
    quiet.noise_std_deg = 0.0;
    quiet.nominal = {0.1, 0.02, -0.01};
    const AttitudeSeries s = generate_attitude_series(quiet, 3, 500, 0.1);
    for (int i = 0; i < s.size(); ++i) CHECK(s[i] == s[0]);
    CHECK(std::abs(s[0].yaw - 0.1) < 1e-15);

    const AttitudeProcess def;
    const AttitudeSeries a = generate_attitude_series(def, 42, 2000, 0.1);
    const AttitudeSeries b = generate_attitude_series(def, 42, 2000, 0.1);
    CHECK(a.samples() == b.samples());
    CHECK(a.samples() != generate_attitude_series(def, 43, 2000, 0.1).samples());
}

TEST_CASE("attitude process amplitude envelope") {
    const AttitudeProcess def;
    const AttitudeSeries s = generate_attitude_series(def, 7, 100000, 0.1);
    // Stationary AR(1) std is 0.05 / sqrt(1 - 0.95^2) deg; allow 6 of them.
    const double noise = 6.0 * def.noise_std_deg / std::sqrt(1.0 - def.noise_coeff * def.noise_coeff);
    double max_pitch = 0.0, max_roll = 0.0;
    for (int i = 0; i < s.size(); ++i) {
        max_pitch = std::max(max_pitch, std::abs(rad2deg(s[i].pitch)));
        max_roll = std::max(max_roll, std::abs(rad2deg(s[i].roll)));
    }
    CHECK(max_pitch <= 3.0 * def.sinusoids + noise);
    CHECK(max_roll <= 3.0 * def.sinusoids + noise);
    CHECK(max_pitch > 0.0);
}

TEST_CASE("place_users layouts") {
    const auto one = place_users(UserLayout::uniform, 1, 1000.0, 5);
    CHECK(one == place_users(UserLayout::uniform, 1, 1000.0, 5));
    CHECK(one[0].head<2>().norm() <= 1000.0);

    double uni = 0.0, edge = 0.0;
    const int n = 10000;
    const auto u = place_users(UserLayout::uniform, n, 1.0, 1);
    const auto e = place_users(UserLayout::edge_biased, n, 1.0, 1);
    for (int i = 0; i < n; ++i) {
        uni += u[i].head<2>().norm() / n;
        edge += e[i].head<2>().norm() / n;
    }
    CHECK(edge > uni);
    CHECK(uni == doctest::Approx(2.0 / 3.0).epsilon(0.02));
    CHECK(edge == doctest::Approx(4.0 / 5.0).epsilon(0.02));

    for (auto layout : {UserLayout::uniform, UserLayout::clustered, UserLayout::edge_biased}) {
        const auto pts = place_users(layout, 500, 20000.0, 9, Vec2(100.0, -50.0));
        for (const auto& p : pts) {
            CHECK(p.z() == 0.0);
            CHECK((p.head<2>() - Vec2(100.0, -50.0)).norm() <= 20000.0);
        }
    }
}

TEST_CASE("compensation_attitude") {
    const double slope = 1e-3;  // rad per slot
    std::vector<EulerZYX> ramp(100);
    for (int i = 0; i < 100; ++i) ramp[i] = {0.5 * slope * i, slope * i, -slope * i};
    const AttitudeSeries truth(0.1, ramp);
    const EulerZYX nominal{};
    const int tau = 60, d = 6;

    CHECK(compensation_attitude(CompensationMode::ideal, truth, nominal, nullptr, tau, d) == truth[tau]);
    CHECK(rotation_log_vee(euler_to_rotation(truth[tau]),
                           euler_to_rotation(compensation_attitude(CompensationMode::ideal, truth, nominal, nullptr,
                                                                   tau, d)))
              .norm() == 0.0);
    CHECK(compensation_attitude(CompensationMode::none, truth, nominal, nullptr, tau, d) == nominal);

    const EulerZYX r = compensation_attitude(CompensationMode::reactive, truth, nominal, nullptr, tau, d);
    CHECK(truth[tau].pitch - r.pitch == doctest::Approx(slope * (d + 1)));
    CHECK(truth[tau].roll - r.roll == doctest::Approx(-slope * (d + 1)));
    CHECK(truth[tau].yaw - r.yaw == doctest::Approx(0.5 * slope * (d + 1)));

    const EulerZYX c{0.2, 0.01, 0.03};
    const AttitudeSeries flat(0.1, std::vector<EulerZYX>(100, c));
    ForecastOutput f;
    f.origin = tau - d - 1;
    f.horizons.assign(12, c);
    for (auto mode : {CompensationMode::none, CompensationMode::reactive, CompensationMode::forecast,
                      CompensationMode::ideal})
        CHECK(compensation_attitude(mode, flat, c, &f, tau, d) == c);
}

TEST_CASE("ideal mode with line of sight and a generous budget admits everyone") {
    ScenarioConfig c = small_config();
    c.channel = ChannelPreset::pure_los;
    c.modes = {CompensationMode::ideal};
    c.p_max = 1000.0;
    c.epsilon = 1e6;
    const RunResult r = run_experiment(c);
    REQUIRE(r.records.size() == 24);
    for (const auto& rec : r.records) {
        CHECK(rec.qar == 1.0);
        CHECK(rec.feasible);
        CHECK(rec.max_pointing_err_deg == doctest::Approx(0.0).epsilon(1e-9));
    }
}

TEST_CASE("run_experiment aggregates, determinism, split disjointness") {
    const ScenarioConfig c = small_config();
    const RunResult a = run_experiment(c);
    const RunResult b = run_experiment(c);
    CHECK(snapshots_csv(a.records) == snapshots_csv(b.records));
    CHECK_FALSE(a.calibration_origins.overlaps(a.test_origins));
    CHECK(a.calibration_origins.end <= a.test_origins.begin);
    REQUIRE(a.summary.size() == c.modes.size());
    for (const auto& s : a.summary) {
        double q = 0.0, rate = 0.0;
        std::size_t n = 0;
        for (const auto& rec : a.records) {
            if (rec.mode != s.mode) continue;
            q += rec.qar;
            rate += rec.sum_rate;
            ++n;
            CHECK(rec.feasible);
        }
        CHECK(n == s.count);
        CHECK(std::abs(s.mean_qar - q / n) <= 1e-12);
        CHECK(std::abs(s.mean_sum_rate - rate / n) <= 1e-12 * std::max(1.0, rate / n));
        CHECK(s.feasible_fraction == 1.0);
    }

    ScenarioConfig one_thread = c;
    one_thread.threads = 1;
    CHECK(snapshots_csv(run_experiment(one_thread).records) == snapshots_csv(a.records));
}

TEST_CASE("emit_results: empty run, round trips, csv/json agreement") {
    ScenarioConfig c = small_config();
    c.snapshots = 0;
    const RunResult empty = run_experiment(c);
    const fs::path e = scratch("empty");
    emit_results(empty, e, OutputFormat::both);
    CHECK(slurp(e / "snapshots.csv") == "snapshot,mode,K,QAR,sum_rate,ee,power,feasible,max_pointing_err_deg\n");
    const auto summary = nlohmann::json::parse(slurp(e / "summary.json"));
    CHECK(summary.at("empty").get<bool>());
    CHECK(summary.at("snapshots").get<int>() == 0);

    const RunResult r = run_experiment(small_config());
    const fs::path d = scratch("full");
    emit_results(r, d, OutputFormat::both);
    const auto csv = read_snapshots_csv(d / "snapshots.csv");
    const auto js = read_snapshots_json(d / "snapshots.json");
    REQUIRE(csv.size() == r.records.size());
    REQUIRE(js.size() == r.records.size());
    for (std::size_t i = 0; i < csv.size(); ++i) {
        CHECK(csv[i].qar == r.records[i].qar);
        CHECK(csv[i].sum_rate == r.records[i].sum_rate);
        CHECK(csv[i].ee == r.records[i].ee);
        CHECK(csv[i].power == r.records[i].power);
        CHECK(csv[i].max_pointing_err_deg == r.records[i].max_pointing_err_deg);
        CHECK(js[i].sum_rate == r.records[i].sum_rate);
        CHECK(js[i].attitude_err_deg == r.records[i].attitude_err_deg);
        CHECK(js[i].certified == r.records[i].certified);
    }
    CHECK(snapshots_csv(csv) == slurp(d / "snapshots.csv"));

    // Aggregates recomputed from either file equal the written summary.
    const auto from_csv = summarize(csv, small_config().modes);
    const auto from_json = summarize(js, small_config().modes);
    const auto written = nlohmann::json::parse(slurp(d / "summary.json")).at("modes");
    for (std::size_t m = 0; m < from_csv.size(); ++m) {
        CHECK(from_csv[m].mean_sum_rate == written[m].at("mean_sum_rate").get<double>());
        CHECK(from_json[m].mean_qar == written[m].at("mean_QAR").get<double>());
    }
    CHECK(read_calibration(d / "calibration.txt").delta_omega == r.calibration.delta_omega);
}

TEST_CASE("config parsing is strict and round trips") {
    const ScenarioConfig def;
    const std::string text = config_to_json(def);
    CHECK(config_to_json(parse_config(text)) == text);

    auto j = nlohmann::json::parse(text);
    j["users"]["colour"] = "red";
    try {
        parse_config(j.dump());
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
        CHECK(std::string(e.what()).find("colour") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config(R"({"modes": ["sideways"]})"), Error);
    CHECK_THROWS_AS(parse_config(R"({"qos": {"p_max": -1}})"), Error);
    CHECK_THROWS_AS(parse_config("{not json"), Error);

    const ScenarioConfig partial = parse_config(R"({"users": {"count": 6, "layout": "edge-biased"}})");
    CHECK(partial.users == 6);
    CHECK(partial.layout == UserLayout::edge_biased);
    CHECK(partial.snapshots == def.snapshots);
}

TEST_CASE("sweep writes one cell per combination") {
    ScenarioConfig c = small_config();
    c.snapshots = 6;
    c.modes = {CompensationMode::none, CompensationMode::ideal};
    const fs::path d = scratch("sweep");
    const auto cells = run_sweep(config_to_json(c), {parse_sweep_axis("users.count=3,4"),
                                                     parse_sweep_axis("solver.priority=qos-difficulty,random")},
                                 d, OutputFormat::csv);
    CHECK(cells.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(fs::exists(d / ("cell_" + std::to_string(i)) / "snapshots.csv"));
    std::ifstream in(d / "sweep.csv");
    int lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    CHECK(lines == 1 + 4 * 2);
    for (const auto& [label, r] : cells)
        for (const auto& s : r.summary) CHECK(s.feasible_fraction == 1.0);
    CHECK_THROWS_AS(parse_sweep_axis("users.count"), Error);
    CHECK_THROWS_AS(run_sweep(config_to_json(c), {parse_sweep_axis("users.nope=1")}, d, OutputFormat::csv), Error);
}
