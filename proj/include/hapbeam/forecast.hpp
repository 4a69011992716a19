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

#include "hapbeam/geometry.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hapbeam {

/// Uniformly sampled yaw/pitch/roll telemetry, radians. Yaw is stored wrapped.
class AttitudeSeries {
public:
    AttitudeSeries() = default;
    AttitudeSeries(double dt, std::vector<EulerZYX> samples);

    double dt() const { return dt_; }
    int size() const { return static_cast<int>(samples_.size()); }
    const EulerZYX& operator[](int i) const { return samples_[static_cast<std::size_t>(i)]; }
    const std::vector<EulerZYX>& samples() const { return samples_; }

private:
    double dt_ = 0.1;
    std::vector<EulerZYX> samples_;
};

/// Telemetry CSV with header `t,yaw_deg,pitch_deg,roll_deg`.
AttitudeSeries load_telemetry_csv(const std::filesystem::path& path);
void write_telemetry_csv(const std::filesystem::path& path, const AttitudeSeries& series);

/// The look-back window is samples origin-window+1 .. origin (inclusive).
struct ForecastRequest {
    int origin = 0;
    int window = 192;
    int horizon = 12;
    int delay = 6;

    /// Throws invalid-argument for bad shapes and range for a window outside the series.
    void validate(const AttitudeSeries& series) const;
};

struct ForecastOutput {
    int origin = 0;
    std::vector<EulerZYX> horizons;  // entry h-1 targets slot origin + h
    std::string forecaster;
    bool fallback = false;           // AR fit degenerated into a linear-trend channel
};

ForecastOutput forecast_persistence(const ForecastRequest& req, const AttitudeSeries& series);

/// Per-channel least-squares slope over the window (yaw unwrapped), extrapolated
/// from the last sample.
ForecastOutput forecast_linear_trend(const ForecastRequest& req, const AttitudeSeries& series);

/// Per-channel AR(order) fitted by least squares on the demeaned window and
/// iterated forward. Yaw is modeled through its sine and cosine.
ForecastOutput forecast_ar(const ForecastRequest& req, const AttitudeSeries& series, int order = 8);

enum class ForecasterKind { persistence, linear, ar, external };

using ExternalForecasts = std::map<int, ForecastOutput>;
using Forecaster = std::function<ForecastOutput(const ForecastRequest&, const AttitudeSeries&)>;

Forecaster make_forecaster(ForecasterKind kind, int ar_order = 8,
                           std::shared_ptr<const ExternalForecasts> external = nullptr);

/// Forecast CSV with header `origin_slot,horizon,yaw_deg,pitch_deg,roll_deg`.
/// Horizons must run 1..h_pred contiguously per origin; h_pred <= 0 infers it
/// from the first origin.
ExternalForecasts load_external_forecasts(const std::filesystem::path& path, int h_pred = 0);
void write_external_forecasts(const std::filesystem::path& path, const ExternalForecasts& outputs);

struct AxisErrorStats {
    double mae = 0.0;
    double rmse = 0.0;
    double p95 = 0.0;
    double p99 = 0.0;
};

/// Errors in degrees, axes ordered yaw, pitch, roll. Angle errors are wrapped
/// to (-180, 180] before taking magnitudes.
struct ForecastErrorReport {
    std::array<AxisErrorStats, 3> target;  // horizons d+1..H_pred
    std::array<AxisErrorStats, 3> full;    // horizons 1..H_pred
    std::vector<std::array<double, 3>> horizon_mae;
    std::size_t target_count = 0;
    std::size_t full_count = 0;
};

/// Signed forecast-minus-truth error in degrees, wrapped to (-180, 180].
double wrapped_error_deg(double forecast, double truth);

ForecastErrorReport forecast_errors(const AttitudeSeries& truth, std::span<const ForecastOutput> outputs, int delay,
                                    int h_pred);

}  // namespace hapbeam
