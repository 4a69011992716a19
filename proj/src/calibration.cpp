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

#include "hapbeam/calibration.hpp"

#include "hapbeam/detail/text_io.hpp"
#include "hapbeam/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace hapbeam {

std::vector<RotationResidual> window_residuals(const AttitudeSeries& truth, const ForecastOutput& output, int delay,
                                               int h_pred) {
    if (delay < 0 || delay >= h_pred) fail(ErrorKind::invalid_argument, "need 0 <= d < H_pred");
    if (static_cast<int>(output.horizons.size()) < h_pred)
        fail(ErrorKind::range, "forecast has fewer than H_pred horizons");
    if (output.origin < 0 || output.origin + h_pred >= truth.size())
        fail(ErrorKind::range, "truth does not cover origin " + std::to_string(output.origin) + " + H_pred");
    std::vector<RotationResidual> out;
    out.reserve(static_cast<std::size_t>(h_pred - delay));
    for (int h = delay + 1; h <= h_pred; ++h)
        out.push_back(rotation_log_vee(euler_to_rotation(output.horizons[h - 1]),
                                       euler_to_rotation(truth[output.origin + h])));
    return out;
}

double target_window_max(std::span<const RotationResidual> residuals) {
    if (residuals.empty()) fail(ErrorKind::invalid_argument, "empty residual window");
    double z = 0.0;
    for (const auto& r : residuals) z = std::max(z, r.norm());
    return z;
}

double calibrate_radius(std::span<const double> window_maxima, double rho) {
    if (window_maxima.empty()) fail(ErrorKind::insufficient_data, "no calibration windows");
    if (!(rho > 0.0 && rho < 1.0)) fail(ErrorKind::invalid_argument, "rho must lie in (0, 1)");
    std::vector<double> z(window_maxima.begin(), window_maxima.end());
    std::sort(z.begin(), z.end());
    const double n = static_cast<double>(z.size());
    // Guard ceil() against representation noise in (1-rho)(n+1).
    const double pos = (1.0 - rho) * (n + 1.0);
    auto idx = static_cast<std::size_t>(std::ceil(pos - 1e-9 * pos));
    idx = std::clamp<std::size_t>(idx, 1, z.size());
    return z[idx - 1];
}

ResidualMoments calibrate_moments(std::span<const RotationResidual> pooled) {
    if (pooled.size() < 2) fail(ErrorKind::insufficient_data, "need at least two residuals for moments");
    ResidualMoments m;
    for (const auto& r : pooled) m.mean += r;
    m.mean /= static_cast<double>(pooled.size());
    for (const auto& r : pooled) {
        const Vec3 c = r - m.mean;
        m.covariance += c * c.transpose();
    }
    m.covariance /= static_cast<double>(pooled.size() - 1);
    m.covariance = 0.5 * (m.covariance + m.covariance.transpose()).eval();
    return m;
}

double coverage_check(std::span<const double> held_out_maxima, double delta_omega) {
    if (held_out_maxima.empty()) return 0.0;
    std::size_t hit = 0;
    for (double z : held_out_maxima)
        if (z <= delta_omega) ++hit;
    return static_cast<double>(hit) / static_cast<double>(held_out_maxima.size());
}

void require_disjoint(const OriginRange& calibration, const OriginRange& evaluation) {
    if (calibration.overlaps(evaluation))
        fail(ErrorKind::invariant_violation, "calibration and evaluation origins overlap");
}

CalibrationReport calibrate_outputs(const AttitudeSeries& truth, std::span<const ForecastOutput> outputs, int delay,
                                    int h_pred, double rho) {
    CalibrationReport rep;
    rep.rho = rho;
    rep.delay = delay;
    rep.h_pred = h_pred;
    std::vector<RotationResidual> pooled;
    for (const auto& out : outputs) {
        const auto res = window_residuals(truth, out, delay, h_pred);
        rep.window_maxima.push_back(target_window_max(res));
        pooled.insert(pooled.end(), res.begin(), res.end());
    }
    rep.n = rep.window_maxima.size();
    rep.delta_omega = calibrate_radius(rep.window_maxima, rho);
    rep.moments = calibrate_moments(pooled);
    return rep;
}

CalibrationReport calibrate(const AttitudeSeries& truth, const Forecaster& forecaster, const OriginRange& origins,
                            int window, int delay, int h_pred, double rho, int stride) {
    if (stride < 1) fail(ErrorKind::invalid_argument, "calibration stride must be >= 1");
    std::vector<ForecastOutput> outputs;
    for (int t = origins.begin; t < origins.end; t += stride)
        outputs.push_back(forecaster(ForecastRequest{t, window, h_pred, delay}, truth));
    return calibrate_outputs(truth, outputs, delay, h_pred, rho);
}

namespace {

std::string join(std::span<const double> v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ' ';
        s += detail::format_double(v[i]);
    }
    return s;
}

}  // namespace

std::string format_calibration(const CalibrationReport& r) {
    const Mat3 sigma_rows = r.moments.covariance.transpose();  // column-major storage -> row-major order
    std::ostringstream os;
    os << "delta_omega_rad = " << detail::format_double(r.delta_omega) << '\n'
       << "rho = " << detail::format_double(r.rho) << '\n'
       << "rho_s = " << detail::format_double(r.rho_s) << '\n'
       << "n = " << r.n << '\n'
       << "mu_omega = " << join(std::span<const double>(r.moments.mean.data(), 3)) << '\n'
       << "sigma_omega = " << join(std::span<const double>(sigma_rows.data(), 9)) << '\n'
       << "d = " << r.delay << '\n'
       << "H_pred = " << r.h_pred << '\n';
    return os.str();
}

CalibrationReport parse_calibration(const std::string& text) {
    std::map<std::string, std::vector<std::string_view>> kv;
    std::istringstream is(text);
    std::vector<std::string> lines;
    for (std::string line; std::getline(is, line);) lines.push_back(line);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto line = detail::trim(lines[i]);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            fail(ErrorKind::parse, "calibration line " + std::to_string(i + 1) + ": expected key = value");
        const std::string key(detail::trim(line.substr(0, eq)));
        std::vector<std::string_view> values;
        for (auto tok : detail::split(detail::trim(line.substr(eq + 1)), ' '))
            if (!detail::trim(tok).empty()) values.push_back(tok);
        kv[key] = values;
    }
    auto get = [&](const std::string& key, std::size_t count) -> const std::vector<std::string_view>& {
        const auto it = kv.find(key);
        if (it == kv.end()) fail(ErrorKind::parse, "calibration report is missing key '" + key + "'");
        if (it->second.size() != count)
            fail(ErrorKind::parse, "calibration key '" + key + "' expects " + std::to_string(count) + " values");
        return it->second;
    };
    for (const auto& [key, _] : kv) {
        static const char* known[] = {"delta_omega_rad", "rho", "rho_s", "n", "mu_omega", "sigma_omega", "d", "H_pred"};
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known))
            fail(ErrorKind::parse, "unknown calibration key '" + key + "'");
    }
    CalibrationReport r;
    r.delta_omega = detail::parse_double(get("delta_omega_rad", 1)[0], "delta_omega_rad");
    r.rho = detail::parse_double(get("rho", 1)[0], "rho");
    if (kv.count("rho_s")) r.rho_s = detail::parse_double(get("rho_s", 1)[0], "rho_s");
    r.n = static_cast<std::size_t>(detail::parse_int(get("n", 1)[0], "n"));
    const auto& mu = get("mu_omega", 3);
    for (int i = 0; i < 3; ++i) r.moments.mean(i) = detail::parse_double(mu[i], "mu_omega");
    const auto& sig = get("sigma_omega", 9);
    for (int i = 0; i < 9; ++i) r.moments.covariance(i / 3, i % 3) = detail::parse_double(sig[i], "sigma_omega");
    r.delay = static_cast<int>(detail::parse_int(get("d", 1)[0], "d"));
    r.h_pred = static_cast<int>(detail::parse_int(get("H_pred", 1)[0], "H_pred"));
    return r;
}

void write_calibration(const std::filesystem::path& path, const CalibrationReport& report) {
    detail::write_text(path, format_calibration(report));
}

CalibrationReport read_calibration(const std::filesystem::path& path) {
    std::string text;
    for (const auto& l : detail::read_lines(path)) text += l + '\n';
    return parse_calibration(text);
}

}  // namespace hapbeam
