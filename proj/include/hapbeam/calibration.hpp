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

#include "hapbeam/forecast.hpp"
#include "hapbeam/geometry.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hapbeam {

/// Pointing residuals vee(log(R_hat^T R)) at horizons d+1..h_pred of one forecast.
std::vector<RotationResidual> window_residuals(const AttitudeSeries& truth, const ForecastOutput& output, int delay,
                                               int h_pred);

/// Z_t = max_h ||dw_h||.
double target_window_max(std::span<const RotationResidual> residuals);

/// Conformal (1 - rho) radius: the order statistic Z_(ceil((1-rho)(n+1))), index clamped to n.
double calibrate_radius(std::span<const double> window_maxima, double rho);

struct ResidualMoments {
    Vec3 mean = Vec3::Zero();
    Mat3 covariance = Mat3::Zero();  // unbiased
};

ResidualMoments calibrate_moments(std::span<const RotationResidual> pooled);

/// Fraction of held-out windows with Z_t <= delta.
double coverage_check(std::span<const double> held_out_maxima, double delta_omega);

/// Half-open range of forecast origins [begin, end).
struct OriginRange {
    int begin = 0;
    int end = 0;

    int size() const { return end > begin ? end - begin : 0; }
    bool overlaps(const OriginRange& other) const { return begin < other.end && other.begin < end; }
};

/// Throws invariant-violation if the two ranges share an origin.
void require_disjoint(const OriginRange& calibration, const OriginRange& evaluation);

struct CalibrationReport {
    double delta_omega = 0.0;  // radians
    double rho = 0.1;
    double rho_s = 0.0;
    std::size_t n = 0;
    std::vector<double> window_maxima;
    ResidualMoments moments;
    int delay = 6;
    int h_pred = 12;
};

/// Runs `forecaster` at every origin in `origins` (stride `stride`), collects
/// target-window residuals and derives delta_omega and the residual moments.
CalibrationReport calibrate(const AttitudeSeries& truth, const Forecaster& forecaster, const OriginRange& origins,
                            int window, int delay, int h_pred, double rho, int stride = 1);

/// Calibration from precomputed forecast outputs (e.g. replayed external forecasts).
CalibrationReport calibrate_outputs(const AttitudeSeries& truth, std::span<const ForecastOutput> outputs, int delay,
                                    int h_pred, double rho);

/// `key = value` text with keys delta_omega_rad, rho, rho_s, n, mu_omega,
/// sigma_omega (row-major), d, H_pred.
std::string format_calibration(const CalibrationReport& report);
CalibrationReport parse_calibration(const std::string& text);
void write_calibration(const std::filesystem::path& path, const CalibrationReport& report);
CalibrationReport read_calibration(const std::filesystem::path& path);

}  // namespace hapbeam
