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

#include "hapbeam/array_model.hpp"
#include "hapbeam/calibration.hpp"
#include "hapbeam/channel.hpp"
#include "hapbeam/forecast.hpp"
#include "hapbeam/solver.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hapbeam {

enum class UserLayout { uniform, clustered, edge_biased };
enum class ChannelPreset { rician_strong, rician_weak, pure_los };
enum class CompensationMode { none, reactive, forecast, ideal };

const char* to_string(UserLayout v);
const char* to_string(ChannelPreset v);
const char* to_string(CompensationMode v);
const char* to_string(ForecasterKind v);
const char* to_string(AdmissionPriority v);

/// Rician factor of a preset (infinite for pure LoS).
double preset_kappa(ChannelPreset preset);

/// Synthetic attitude: per axis a sum of sinusoids with random period, phase and
/// amplitude (amplitude uniform in [0, cap]) plus AR(1) noise.
struct AttitudeProcess {
    int sinusoids = 3;
    double period_min = 3.0;   // seconds
    double period_max = 30.0;  // seconds
    double amp_pitch_roll_deg = 3.0;
    double amp_yaw_deg = 6.0;
    double noise_coeff = 0.95;
    double noise_std_deg = 0.05;
    EulerZYX nominal;  // level attitude the process oscillates around

    void validate() const;
};

AttitudeSeries generate_attitude_series(const AttitudeProcess& params, std::uint64_t seed, int length, double dt);

/// Ground positions (z = 0) inside a disc of `radius` centred at `center`.
std::vector<Vec3> place_users(UserLayout layout, int count, double radius, std::uint64_t seed,
                              const Vec2& center = Vec2::Zero());

/// Attitude used to steer the analog beam at slot `tau`. `forecast` must be
/// the output issued at origin tau - delay - 1 when mode is forecast.
EulerZYX compensation_attitude(CompensationMode mode, const AttitudeSeries& truth, const EulerZYX& nominal,
                               const ForecastOutput* forecast, int tau, int delay);

struct ScenarioConfig {
    ArrayConfig array;  // rf_chains follows users
    double altitude = 20000.0;
    Vec2 hap_xy = Vec2::Zero();
    int users = 10;
    UserLayout layout = UserLayout::uniform;
    double disc_radius = 20000.0;
    ChannelPreset channel = ChannelPreset::rician_strong;
    LargeScaleModel large_scale = LargeScaleModel::free_space;

    double r_min = 3.0;          // bit/s
    double p_max = 1.0;          // watts
    double noise_power = 2e-15;  // watts
    double bandwidth = 1.0;      // hertz
    double circuit_power = 1.0;  // watts

    double dt = 0.1;
    int delay = 6;
    int h_pred = 12;
    int window = 192;

    ForecasterKind forecaster = ForecasterKind::ar;
    int ar_order = 8;
    std::string forecast_path;   // external forecaster CSV
    std::string telemetry_path;  // replaces the synthetic process when set

    std::vector<CompensationMode> modes{CompensationMode::none, CompensationMode::reactive,
                                        CompensationMode::forecast, CompensationMode::ideal};
    SolverOptions solver;

    double rho = 0.1;
    double epsilon = 0.5;
    double box_half_width_deg = 3.0;
    int box_grid = 33;

    AttitudeProcess attitude;
    std::uint64_t attitude_seed = 1;
    std::uint64_t user_seed = 2;
    std::uint64_t channel_seed = 3;
    std::uint64_t priority_seed = 4;

    int snapshots = 500;
    int series_length = 3000;
    int threads = 0;  // 0: hardware concurrency

    void validate() const;
};

/// JSON config; unknown keys and out-of-set enum values are config errors.
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ScenarioConfig& config);

struct SnapshotRecord {
    int snapshot = 0;
    int slot = 0;
    CompensationMode mode = CompensationMode::none;
    int users = 0;
    double qar = 0.0;
    double sum_rate = 0.0;
    double ee = 0.0;
    double power = 0.0;
    bool feasible = false;
    double max_pointing_err_deg = 0.0;
    int certified = 0;
    std::array<double, 3> attitude_err_deg{};  // |applied - true| per axis: yaw, pitch, roll
    double solve_ms = 0.0;                     // wall clock, informational
};

struct ModeSummary {
    CompensationMode mode = CompensationMode::none;
    std::size_t count = 0;
    double mean_qar = 0.0;
    double mean_sum_rate = 0.0;
    double mean_ee = 0.0;
    double mean_power = 0.0;
    double feasible_fraction = 0.0;
    double p95_sum_rate = 0.0;
    double p99_sum_rate = 0.0;
    double mean_pointing_err_deg = 0.0;
    double mean_certified = 0.0;
    double p95_solve_ms = 0.0;
    double p99_solve_ms = 0.0;
};

struct RunResult {
    std::vector<SnapshotRecord> records;  // snapshot-major, modes in config order
    std::vector<ModeSummary> summary;
    CalibrationReport calibration;
    double coverage_stride1 = 0.0;
    double coverage_stride_h = 0.0;
    std::optional<ForecastErrorReport> forecast_errors;
    OriginRange calibration_origins;
    OriginRange test_origins;
};

/// Target slots of the snapshots: evenly spread over the test split.
std::vector<int> snapshot_slots(const ScenarioConfig& config, int series_length);

RunResult run_experiment(const ScenarioConfig& config);

/// Aggregates per mode; means are plain averages of the per-snapshot values.
std::vector<ModeSummary> summarize(const std::vector<SnapshotRecord>& records,
                                   const std::vector<CompensationMode>& modes);

enum class OutputFormat { csv, json, both };

/// Writes snapshots.csv / snapshots.json, summary.json and calibration.txt under `dir`.
void emit_results(const RunResult& result, const std::filesystem::path& dir, OutputFormat format);
std::string snapshots_csv(const std::vector<SnapshotRecord>& records);
std::vector<SnapshotRecord> read_snapshots_csv(const std::filesystem::path& path);
std::vector<SnapshotRecord> read_snapshots_json(const std::filesystem::path& path);
std::string summary_json(const RunResult& result);
std::string forecast_report_json(const ForecastErrorReport& report);

/// `path=v1,v2,...` where path is a dotted config key.
struct SweepAxis {
    std::string path;
    std::vector<std::string> values;
};
SweepAxis parse_sweep_axis(const std::string& text);

/// Runs the cross product of the axes; cell i is written under dir/cell_<i>,
/// and dir/sweep.csv lists each cell's settings and per-mode means.
std::vector<std::pair<std::string, RunResult>> run_sweep(const std::string& base_config_json,
                                                         const std::vector<SweepAxis>& axes,
                                                         const std::filesystem::path& dir, OutputFormat format);

}  // namespace hapbeam
