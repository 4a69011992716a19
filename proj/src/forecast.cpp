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

#include "hapbeam/forecast.hpp"

#include "hapbeam/detail/stats.hpp"
#include "hapbeam/detail/text_io.hpp"
#include "hapbeam/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hapbeam {

using detail::format_double;

AttitudeSeries::AttitudeSeries(double dt, std::vector<EulerZYX> samples) : dt_(dt), samples_(std::move(samples)) {
    if (!(dt > 0.0) || !std::isfinite(dt)) fail(ErrorKind::invalid_argument, "sample period must be positive");
    for (auto& s : samples_) {
        if (!std::isfinite(s.yaw) || !std::isfinite(s.pitch) || !std::isfinite(s.roll))
            fail(ErrorKind::invalid_argument, "attitude series contains non-finite samples");
        s.yaw = wrap_pi(s.yaw);
    }
}

AttitudeSeries load_telemetry_csv(const std::filesystem::path& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty() || detail::trim(lines[0]) != "t,yaw_deg,pitch_deg,roll_deg")
        fail(ErrorKind::parse, path.string() + " row 1: expected header t,yaw_deg,pitch_deg,roll_deg");
    std::vector<double> times;
    std::vector<EulerZYX> samples;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (detail::trim(lines[i]).empty()) continue;
        const auto cols = detail::split(lines[i], ',');
        const std::string row = path.string() + " row " + std::to_string(i + 1);
        if (cols.size() != 4) fail(ErrorKind::parse, row + ": expected 4 columns, got " + std::to_string(cols.size()));
        times.push_back(detail::parse_double(cols[0], row + " column t"));
        samples.push_back({detail::disk_degrees_to_radians(detail::parse_double(cols[1], row + " column yaw_deg")),
                           detail::disk_degrees_to_radians(detail::parse_double(cols[2], row + " column pitch_deg")),
                           detail::disk_degrees_to_radians(detail::parse_double(cols[3], row + " column roll_deg"))});
    }
    if (samples.size() < 2) fail(ErrorKind::parse, path.string() + ": need at least two telemetry rows");
    const double dt = times[1] - times[0];
    if (!(dt > 0.0)) fail(ErrorKind::parse, path.string() + " row 3 column t: time is not increasing");
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double expected = times[0] + static_cast<double>(i) * dt;
        if (std::abs(times[i] - expected) > 1e-6 * dt + 1e-9 * std::abs(expected))
            fail(ErrorKind::parse, path.string() + " row " + std::to_string(i + 2) + " column t: sampling is not uniform");
    }
    return AttitudeSeries(dt, std::move(samples));
}

void write_telemetry_csv(const std::filesystem::path& path, const AttitudeSeries& series) {
    std::ostringstream os;
    os << "t,yaw_deg,pitch_deg,roll_deg\n";
    for (int i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        os << format_double(i * series.dt()) << ',' << format_double(detail::radians_to_disk_degrees(s.yaw)) << ','
           << format_double(detail::radians_to_disk_degrees(s.pitch)) << ','
           << format_double(detail::radians_to_disk_degrees(s.roll)) << '\n';
    }
    detail::write_text(path, os.str());
}

void ForecastRequest::validate(const AttitudeSeries& series) const {
    if (delay < 1 || delay >= horizon) fail(ErrorKind::invalid_argument, "need 1 <= d < H_pred");
    if (window < 2) fail(ErrorKind::invalid_argument, "look-back window must be >= 2");
    if (origin - window + 1 < 0 || origin >= series.size())
        fail(ErrorKind::range, "forecast window for origin " + std::to_string(origin) + " is outside the series");
}

namespace {

enum Axis { kYaw = 0, kPitch = 1, kRoll = 2 };

double component(const EulerZYX& a, int axis) { return axis == kYaw ? a.yaw : axis == kPitch ? a.pitch : a.roll; }

// Window samples of one channel; yaw is unwrapped relative to the first sample.
std::vector<double> window_channel(const ForecastRequest& req, const AttitudeSeries& series, int axis) {
    std::vector<double> x(static_cast<std::size_t>(req.window));
    const int start = req.origin - req.window + 1;
    for (int i = 0; i < req.window; ++i) x[i] = component(series[start + i], axis);
    if (axis == kYaw)
        for (std::size_t i = 1; i < x.size(); ++i) x[i] = x[i - 1] + wrap_pi(x[i] - x[i - 1]);
    return x;
}

double least_squares_slope(const std::vector<double>& x) {
    constexpr double kEps = 1e-12;
    const double n = static_cast<double>(x.size());
    const double l_bar = (n + 1.0) / 2.0;
    double x_bar = 0.0;
    for (double v : x) x_bar += v;
    x_bar /= n;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dl = static_cast<double>(i + 1) - l_bar;
        num += dl * (x[i] - x_bar);
        den += dl * dl;
    }
    return num / (den + kEps);
}

std::vector<double> linear_channel(const std::vector<double>& x, int horizon) {
    const double slope = least_squares_slope(x);
    std::vector<double> out(static_cast<std::size_t>(horizon));
    for (int h = 1; h <= horizon; ++h) out[h - 1] = x.back() + slope * h;
    return out;
}

// Returns false when the normal equations are degenerate.
bool ar_channel(const std::vector<double>& x, int order, int horizon, std::vector<double>& out) {
    const int n = static_cast<int>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    std::vector<double> y(x.size());
    for (int i = 0; i < n; ++i) y[i] = x[i] - mean;

    const int rows = n - order;
    Eigen::MatrixXd design(rows, order);
    Eigen::VectorXd target(rows);
    for (int t = order; t < n; ++t) {
        for (int i = 0; i < order; ++i) design(t - order, i) = y[t - 1 - i];
        target(t - order) = y[t];
    }
    Eigen::MatrixXd normal = design.transpose() * design;
    const double trace = normal.trace();
    const double floor = static_cast<double>(rows) * order * std::pow(1e-13 * std::abs(mean), 2);
    if (!(trace > floor)) return false;
    // Light ridge keeps rank-deficient but well-posed fits (pure tones) solvable.
    normal.diagonal().array() += 1e-10 * trace / order;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    if (ldlt.info() != Eigen::Success) return false;
    const Eigen::VectorXd coef = ldlt.solve(design.transpose() * target);
    if (!coef.allFinite()) return false;

    std::vector<double> hist(y);
    out.assign(static_cast<std::size_t>(horizon), 0.0);
    for (int h = 0; h < horizon; ++h) {
        double next = 0.0;
        for (int i = 0; i < order; ++i) next += coef(i) * hist[hist.size() - 1 - i];
        hist.push_back(next);
        out[h] = mean + next;
    }
    return true;
}

ForecastOutput assemble(const ForecastRequest& req, const std::vector<double>& yaw, const std::vector<double>& pitch,
                        const std::vector<double>& roll, std::string tag) {
    ForecastOutput out;
    out.origin = req.origin;
    out.forecaster = std::move(tag);
    out.horizons.resize(static_cast<std::size_t>(req.horizon));
    for (int h = 0; h < req.horizon; ++h) out.horizons[h] = {wrap_pi(yaw[h]), pitch[h], roll[h]};
    return out;
}

}  // namespace

ForecastOutput forecast_persistence(const ForecastRequest& req, const AttitudeSeries& series) {
    req.validate(series);
    ForecastOutput out;
    out.origin = req.origin;
    out.forecaster = "persistence";
    out.horizons.assign(static_cast<std::size_t>(req.horizon), series[req.origin]);
    return out;
}

ForecastOutput forecast_linear_trend(const ForecastRequest& req, const AttitudeSeries& series) {
    req.validate(series);
    return assemble(req, linear_channel(window_channel(req, series, kYaw), req.horizon),
                    linear_channel(window_channel(req, series, kPitch), req.horizon),
                    linear_channel(window_channel(req, series, kRoll), req.horizon), "linear");
}

ForecastOutput forecast_ar(const ForecastRequest& req, const AttitudeSeries& series, int order) {
    req.validate(series);
    if (order < 1) fail(ErrorKind::invalid_argument, "AR order must be >= 1");
    if (req.window < 4 * order) fail(ErrorKind::invalid_argument, "AR fit needs a window of at least 4 * order");

    bool fallback = false;
    auto fit = [&](int axis) {
        const auto x = window_channel(req, series, axis);
        std::vector<double> out;
        if (!ar_channel(x, order, req.horizon, out)) {
            fallback = true;
            out = linear_channel(x, req.horizon);
        }
        return out;
    };
    const auto pitch = fit(kPitch);
    const auto roll = fit(kRoll);

    const auto unwrapped = window_channel(req, series, kYaw);
    std::vector<double> s(unwrapped.size()), c(unwrapped.size());
    for (std::size_t i = 0; i < unwrapped.size(); ++i) {
        s[i] = std::sin(unwrapped[i]);
        c[i] = std::cos(unwrapped[i]);
    }
    std::vector<double> s_hat, c_hat, yaw;
    if (ar_channel(s, order, req.horizon, s_hat) && ar_channel(c, order, req.horizon, c_hat)) {
        yaw.resize(static_cast<std::size_t>(req.horizon));
        for (int h = 0; h < req.horizon; ++h) {
            const double norm = std::hypot(s_hat[h], c_hat[h]);
            yaw[h] = norm > 1e-12 ? std::atan2(s_hat[h] / norm, c_hat[h] / norm) : unwrapped.back();
        }
    } else {
        fallback = true;
        yaw = linear_channel(unwrapped, req.horizon);
    }
    auto out = assemble(req, yaw, pitch, roll, "ar");
    out.fallback = fallback;
    return out;
}

Forecaster make_forecaster(ForecasterKind kind, int ar_order, std::shared_ptr<const ExternalForecasts> external) {
    switch (kind) {
        case ForecasterKind::persistence: return forecast_persistence;
        case ForecasterKind::linear: return forecast_linear_trend;
        case ForecasterKind::ar:
            return [ar_order](const ForecastRequest& r, const AttitudeSeries& s) { return forecast_ar(r, s, ar_order); };
        case ForecasterKind::external:
            if (!external) fail(ErrorKind::config, "external forecaster selected without a forecast file");
            return [external](const ForecastRequest& r, const AttitudeSeries&) {
                const auto it = external->find(r.origin);
                if (it == external->end())
                    fail(ErrorKind::range, "no external forecast for origin slot " + std::to_string(r.origin));
                if (static_cast<int>(it->second.horizons.size()) < r.horizon)
                    fail(ErrorKind::range, "external forecast for origin " + std::to_string(r.origin) +
                                               " has too few horizons");
                return it->second;
            };
    }
    fail(ErrorKind::config, "unknown forecaster");
}

ExternalForecasts load_external_forecasts(const std::filesystem::path& path, int h_pred) {
    const auto lines = detail::read_lines(path);
    const std::string header = "origin_slot,horizon,yaw_deg,pitch_deg,roll_deg";
    if (lines.empty() || detail::trim(lines[0]) != header)
        fail(ErrorKind::parse, path.string() + " row 1: expected header " + header);

    ExternalForecasts out;
    ForecastOutput* current = nullptr;
    auto close_block = [&](std::size_t row) {
        if (current == nullptr) return;
        const int got = static_cast<int>(current->horizons.size());
        if (h_pred <= 0) h_pred = got;
        if (got != h_pred)
            fail(ErrorKind::parse, path.string() + " row " + std::to_string(row) + " column horizon: origin " +
                                       std::to_string(current->origin) + " has " + std::to_string(got) +
                                       " horizons, expected " + std::to_string(h_pred));
    };
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (detail::trim(lines[i]).empty()) continue;
        const std::string row = path.string() + " row " + std::to_string(i + 1);
        const auto cols = detail::split(lines[i], ',');
        if (cols.size() != 5) fail(ErrorKind::parse, row + ": expected 5 columns, got " + std::to_string(cols.size()));
        const auto origin = static_cast<int>(detail::parse_int(cols[0], row + " column origin_slot"));
        const auto horizon = static_cast<int>(detail::parse_int(cols[1], row + " column horizon"));
        EulerZYX a{detail::disk_degrees_to_radians(detail::parse_double(cols[2], row + " column yaw_deg")),
                   detail::disk_degrees_to_radians(detail::parse_double(cols[3], row + " column pitch_deg")),
                   detail::disk_degrees_to_radians(detail::parse_double(cols[4], row + " column roll_deg"))};
        a.yaw = wrap_pi(a.yaw);
        if (current == nullptr || current->origin != origin) {
            close_block(i + 1);
            if (out.count(origin) != 0)
                fail(ErrorKind::parse, row + " column origin_slot: origin " + std::to_string(origin) + " is not contiguous");
            current = &out[origin];
            current->origin = origin;
            current->forecaster = "external";
        }
        const int expected = static_cast<int>(current->horizons.size()) + 1;
        if (horizon != expected)
            fail(ErrorKind::parse, row + " column horizon: expected horizon " + std::to_string(expected) + ", got " +
                                       std::to_string(horizon));
        current->horizons.push_back(a);
    }
    close_block(lines.size() + 1);
    return out;
}

void write_external_forecasts(const std::filesystem::path& path, const ExternalForecasts& outputs) {
    std::ostringstream os;
    os << "origin_slot,horizon,yaw_deg,pitch_deg,roll_deg\n";
    for (const auto& [origin, f] : outputs) {
        for (std::size_t h = 0; h < f.horizons.size(); ++h) {
            const auto& a = f.horizons[h];
            os << origin << ',' << (h + 1) << ',' << format_double(detail::radians_to_disk_degrees(a.yaw)) << ','
               << format_double(detail::radians_to_disk_degrees(a.pitch)) << ','
               << format_double(detail::radians_to_disk_degrees(a.roll)) << '\n';
        }
    }
    detail::write_text(path, os.str());
}

double wrapped_error_deg(double forecast, double truth) { return rad2deg(wrap_pi(forecast - truth)); }

namespace {

AxisErrorStats summarize(const std::vector<double>& abs_err) {
    AxisErrorStats s;
    if (abs_err.empty()) return s;
    double sum = 0.0, sq = 0.0;
    for (double e : abs_err) {
        sum += e;
        sq += e * e;
    }
    const double n = static_cast<double>(abs_err.size());
    s.mae = sum / n;
    s.rmse = std::sqrt(sq / n);
    s.p95 = detail::percentile(abs_err, 0.95);
    s.p99 = detail::percentile(abs_err, 0.99);
    return s;
}

}  // namespace

ForecastErrorReport forecast_errors(const AttitudeSeries& truth, std::span<const ForecastOutput> outputs, int delay,
                                    int h_pred) {
    if (delay < 0 || delay >= h_pred) fail(ErrorKind::invalid_argument, "need 0 <= d < H_pred");
    std::array<std::vector<double>, 3> target, full;
    std::vector<std::array<double, 3>> horizon_sum(static_cast<std::size_t>(h_pred), {0.0, 0.0, 0.0});
    std::vector<std::size_t> horizon_count(static_cast<std::size_t>(h_pred), 0);

    for (const auto& out : outputs) {
        if (static_cast<int>(out.horizons.size()) < h_pred)
            fail(ErrorKind::range, "forecast at origin " + std::to_string(out.origin) + " has fewer than H_pred horizons");
        if (out.origin < 0 || out.origin + h_pred >= truth.size())
            fail(ErrorKind::range, "truth series does not cover the targets of origin " + std::to_string(out.origin));
        for (int h = 1; h <= h_pred; ++h) {
            const auto& f = out.horizons[h - 1];
            const auto& t = truth[out.origin + h];
            const std::array<double, 3> err{std::abs(wrapped_error_deg(f.yaw, t.yaw)),
                                            std::abs(wrapped_error_deg(f.pitch, t.pitch)),
                                            std::abs(wrapped_error_deg(f.roll, t.roll))};
            for (int a = 0; a < 3; ++a) {
                full[a].push_back(err[a]);
                if (h > delay) target[a].push_back(err[a]);
                horizon_sum[h - 1][a] += err[a];
            }
            ++horizon_count[h - 1];
        }
    }
    ForecastErrorReport r;
    for (int a = 0; a < 3; ++a) {
        r.target[a] = summarize(target[a]);
        r.full[a] = summarize(full[a]);
    }
    r.target_count = target[0].size();
    r.full_count = full[0].size();
    r.horizon_mae.resize(static_cast<std::size_t>(h_pred));
    for (int h = 0; h < h_pred; ++h)
        for (int a = 0; a < 3; ++a)
            r.horizon_mae[h][a] = horizon_count[h] ? horizon_sum[h][a] / static_cast<double>(horizon_count[h]) : 0.0;
    return r;
}

}  // namespace hapbeam
