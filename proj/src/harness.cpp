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

#include "hapbeam/harness.hpp"

#include "hapbeam/detail/stats.hpp"
#include "hapbeam/detail/text_io.hpp"
#include "hapbeam/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace hapbeam {

using nlohmann::json;

const char* to_string(UserLayout v) {
    switch (v) {
    case UserLayout::uniform: return "uniform";
    case UserLayout::clustered: return "clustered";
    case UserLayout::edge_biased: return "edge-biased";
    }
    return "?";
}

const char* to_string(ChannelPreset v) {
    switch (v) {
    case ChannelPreset::rician_strong: return "rician-strong";
    case ChannelPreset::rician_weak: return "rician-weak";
    case ChannelPreset::pure_los: return "pure-los";
    }
    return "?";
}

const char* to_string(CompensationMode v) {
    switch (v) {
    case CompensationMode::none: return "none";
    case CompensationMode::reactive: return "reactive";
    case CompensationMode::forecast: return "forecast";
    case CompensationMode::ideal: return "ideal";
    }
    return "?";
}

const char* to_string(ForecasterKind v) {
    switch (v) {
    case ForecasterKind::persistence: return "persistence";
    case ForecasterKind::linear: return "linear";
    case ForecasterKind::ar: return "ar";
    case ForecasterKind::external: return "external";
    }
    return "?";
}

const char* to_string(AdmissionPriority v) {
    switch (v) {
    case AdmissionPriority::qos_difficulty: return "qos-difficulty";
    case AdmissionPriority::channel_gain: return "channel-gain";
    case AdmissionPriority::random: return "random";
    }
    return "?";
}

namespace {

const char* to_string(LargeScaleModel v) { return v == LargeScaleModel::free_space ? "free-space" : "normalized"; }
const char* to_string(RefineObjective v) { return v == RefineObjective::sum_rate ? "sum-rate" : "ee"; }
const char* to_string(DualRegularizer v) { return v == DualRegularizer::identity ? "identity" : "analog-gram"; }

template <class E, std::size_t N>
E enum_from(const std::string& s, const std::array<E, N>& values, const std::string& where) {
    for (const E v : values)
        if (s == to_string(v)) return v;
    std::string allowed;
    for (const E v : values) allowed += std::string(allowed.empty() ? "" : ", ") + to_string(v);
    fail(ErrorKind::config, where + ": '" + s + "' is not one of {" + allowed + "}");
}

constexpr std::array kLayouts{UserLayout::uniform, UserLayout::clustered, UserLayout::edge_biased};
constexpr std::array kPresets{ChannelPreset::rician_strong, ChannelPreset::rician_weak, ChannelPreset::pure_los};
constexpr std::array kModes{CompensationMode::none, CompensationMode::reactive, CompensationMode::forecast,
                            CompensationMode::ideal};
constexpr std::array kForecasters{ForecasterKind::persistence, ForecasterKind::linear, ForecasterKind::ar,
                                  ForecasterKind::external};
constexpr std::array kPriorities{AdmissionPriority::qos_difficulty, AdmissionPriority::channel_gain,
                                 AdmissionPriority::random};
constexpr std::array kLargeScale{LargeScaleModel::free_space, LargeScaleModel::normalized};
constexpr std::array kObjectives{RefineObjective::sum_rate, RefineObjective::energy_efficiency};
constexpr std::array kRegularizers{DualRegularizer::identity, DualRegularizer::analog_gram};

}  // namespace

double preset_kappa(ChannelPreset preset) {
    switch (preset) {
    case ChannelPreset::rician_strong: return 10.0;
    case ChannelPreset::rician_weak: return 1.0;
    case ChannelPreset::pure_los: return std::numeric_limits<double>::infinity();
    }
    return 0.0;
}

// ---- attitude process and users -----------------------------------------

void AttitudeProcess::validate() const {
    if (sinusoids < 0) fail(ErrorKind::config, "attitude.sinusoids must be >= 0");
    if (!(period_min > 0.0) || !(period_max >= period_min))
        fail(ErrorKind::config, "attitude periods must satisfy 0 < period_min <= period_max");
    if (!(amp_pitch_roll_deg >= 0.0) || !(amp_yaw_deg >= 0.0))
        fail(ErrorKind::config, "attitude amplitudes must be >= 0");
    if (!(std::abs(noise_coeff) < 1.0)) fail(ErrorKind::config, "attitude.noise_coeff must lie in (-1, 1)");
    if (!(noise_std_deg >= 0.0)) fail(ErrorKind::config, "attitude.noise_std_deg must be >= 0");
}

AttitudeSeries generate_attitude_series(const AttitudeProcess& params, std::uint64_t seed, int length, double dt) {
    params.validate();
    if (length < 1) fail(ErrorKind::invalid_argument, "series length must be >= 1");
    if (!(dt > 0.0)) fail(ErrorKind::invalid_argument, "dt must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    struct Tone {
        double omega, phase, amp;
    };
    std::array<std::vector<Tone>, 3> tones;  // yaw, pitch, roll
    for (int axis = 0; axis < 3; ++axis) {
        const double cap = deg2rad(axis == 0 ? params.amp_yaw_deg : params.amp_pitch_roll_deg);
        for (int s = 0; s < params.sinusoids; ++s) {
            const double period = params.period_min + (params.period_max - params.period_min) * unit(rng);
            const double phase = 2.0 * kPi * unit(rng);
            const double amp = cap * unit(rng);
            tones[static_cast<std::size_t>(axis)].push_back({2.0 * kPi / period, phase, amp});
        }
    }

    const double noise_std = deg2rad(params.noise_std_deg);
    std::normal_distribution<double> innovation(0.0, 1.0);
    std::array<double, 3> noise{0.0, 0.0, 0.0};
    const std::array<double, 3> base{params.nominal.yaw, params.nominal.pitch, params.nominal.roll};

    std::vector<EulerZYX> samples;
    samples.reserve(static_cast<std::size_t>(length));
    for (int i = 0; i < length; ++i) {
        const double t = i * dt;
        std::array<double, 3> v{};
        for (std::size_t axis = 0; axis < 3; ++axis) {
            double x = base[axis] + noise[axis];
            for (const Tone& tone : tones[axis]) x += tone.amp * std::sin(tone.omega * t + tone.phase);
            v[axis] = x;
        }
        samples.push_back({v[0], v[1], v[2]});
        if (noise_std > 0.0)
            for (double& n : noise) n = params.noise_coeff * n + noise_std * innovation(rng);
    }
    return AttitudeSeries(dt, std::move(samples));
}

std::vector<Vec3> place_users(UserLayout layout, int count, double radius, std::uint64_t seed, const Vec2& center) {
    if (count < 1) fail(ErrorKind::invalid_argument, "user count must be >= 1");
    if (!(radius > 0.0)) fail(ErrorKind::invalid_argument, "disc radius must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto polar = [&](double r) {
        const double a = 2.0 * kPi * unit(rng);
        return Vec2(r * std::cos(a), r * std::sin(a));
    };

    std::vector<Vec3> out;
    out.reserve(static_cast<std::size_t>(count));
    auto push = [&](const Vec2& p) { out.emplace_back(center.x() + p.x(), center.y() + p.y(), 0.0); };

    switch (layout) {
    case UserLayout::uniform:
        for (int k = 0; k < count; ++k) push(polar(radius * std::sqrt(unit(rng))));
        break;
    case UserLayout::edge_biased:
        // Density proportional to r^3 on [0, R]: CDF (r/R)^4.
        for (int k = 0; k < count; ++k) push(polar(radius * std::sqrt(std::sqrt(unit(rng)))));
        break;
    case UserLayout::clustered: {
        const std::array<Vec2, 2> centers{polar(radius * std::sqrt(unit(rng))), polar(radius * std::sqrt(unit(rng)))};
        std::normal_distribution<double> spread(0.0, radius / 10.0);
        for (int k = 0; k < count; ++k) {
            const Vec2& c = centers[static_cast<std::size_t>(k % 2)];
            Vec2 p = c;
            for (int attempt = 0; attempt < 1000; ++attempt) {
                p = c + Vec2(spread(rng), spread(rng));
                if (p.norm() <= radius) break;
            }
            if (p.norm() > radius) p *= radius / p.norm();
            push(p);
        }
        break;
    }
    }
    return out;
}

EulerZYX compensation_attitude(CompensationMode mode, const AttitudeSeries& truth, const EulerZYX& nominal,
                               const ForecastOutput* forecast, int tau, int delay) {
    if (tau < 0 || tau >= truth.size()) fail(ErrorKind::range, "slot " + std::to_string(tau) + " outside the series");
    switch (mode) {
    case CompensationMode::none: return nominal;
    case CompensationMode::ideal: return truth[tau];
    case CompensationMode::reactive: {
        const int src = tau - delay - 1;
        if (src < 0) fail(ErrorKind::range, "reactive mode needs slot " + std::to_string(src));
        return truth[src];
    }
    case CompensationMode::forecast: {
        if (forecast == nullptr) fail(ErrorKind::invalid_argument, "forecast mode needs a forecast");
        if (forecast->origin != tau - delay - 1 || static_cast<int>(forecast->horizons.size()) < delay + 1)
            fail(ErrorKind::invalid_argument, "forecast does not cover slot " + std::to_string(tau));
        return forecast->horizons[static_cast<std::size_t>(delay)];
    }
    }
    return nominal;
}

// ---- config --------------------------------------------------------------

void ScenarioConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::config, std::string(name) + " must be positive");
    };
    if (users < 1) fail(ErrorKind::config, "users.count must be >= 1");
    if (array.rf_chains != users)
        fail(ErrorKind::config, "array.rf_chains must equal users.count (one RF chain per user)");
    try {
        array.validate();
    } catch (const Error& e) {
        fail(ErrorKind::config, std::string("array: ") + e.what());
    }
    positive(altitude, "hap.altitude_m");
    positive(disc_radius, "users.disc_radius_m");
    if (!std::isfinite(hap_xy.x()) || !std::isfinite(hap_xy.y())) fail(ErrorKind::config, "hap position must be finite");
    if (!(r_min >= 0.0) || !std::isfinite(r_min)) fail(ErrorKind::config, "qos.r_min must be >= 0");
    positive(p_max, "qos.p_max");
    positive(noise_power, "qos.noise_power");
    positive(bandwidth, "qos.bandwidth");
    if (!(circuit_power >= 0.0)) fail(ErrorKind::config, "qos.circuit_power must be >= 0");
    positive(dt, "horizon.dt");
    if (delay < 0 || h_pred <= delay) fail(ErrorKind::config, "horizon must satisfy 0 <= delay < h_pred");
    if (window < 1) fail(ErrorKind::config, "horizon.window must be >= 1");
    if (forecaster == ForecasterKind::ar && window < 4 * ar_order)
        fail(ErrorKind::config, "horizon.window must be at least 4 * forecaster.ar_order");
    if (ar_order < 1) fail(ErrorKind::config, "forecaster.ar_order must be >= 1");
    if (forecaster == ForecasterKind::external && forecast_path.empty())
        fail(ErrorKind::config, "external forecaster needs forecaster.path");
    if (modes.empty()) fail(ErrorKind::config, "modes must list at least one compensation mode");
    if (std::set<CompensationMode>(modes.begin(), modes.end()).size() != modes.size())
        fail(ErrorKind::config, "modes must not repeat");
    if (!(rho > 0.0 && rho < 1.0)) fail(ErrorKind::config, "calibration.rho must lie in (0, 1)");
    positive(epsilon, "calibration.epsilon");
    if (!(box_half_width_deg >= 0.0)) fail(ErrorKind::config, "calibration.box_half_width_deg must be >= 0");
    if (box_grid < 1) fail(ErrorKind::config, "calibration.box_grid must be >= 1");
    if (solver.k_min < 0) fail(ErrorKind::config, "solver.k_min must be >= 0");
    if (!(solver.admission_threshold >= 0.0 && solver.admission_threshold <= 1.0))
        fail(ErrorKind::config, "solver.threshold must lie in [0, 1]");
    if (solver.refine_iterations < 0 || solver.refine_iterations > 10)
        fail(ErrorKind::config, "solver.refine_iterations must lie in [0, 10]");
    attitude.validate();
    if (snapshots < 0) fail(ErrorKind::config, "run.snapshots must be >= 0");
    if (threads < 0) fail(ErrorKind::config, "run.threads must be >= 0");
    if (telemetry_path.empty() && series_length < 10)
        fail(ErrorKind::config, "run.series_length must be >= 10");
}

namespace {

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class Section {
public:
    Section(json value, std::string path) : value_(std::move(value)), path_(std::move(path)) {
        if (!value_.is_object()) fail(ErrorKind::config, (path_.empty() ? "config" : path_) + " must be an object");
    }

    Section sub(const std::string& key) {
        used_.insert(key);
        if (!value_.contains(key)) return Section(json::object(), name(key));
        return Section(value_.at(key), name(key));
    }

    void get(const std::string& key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) wrong(key, "a number");
            out = v->get<double>();
        }
    }

    void get(const std::string& key, int& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) wrong(key, "an integer");
            const auto x = v->get<long long>();
            if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) wrong(key, "a 32-bit integer");
            out = static_cast<int>(x);
        }
    }

    void get(const std::string& key, std::uint64_t& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned()) wrong(key, "a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }

    void get(const std::string& key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) wrong(key, "a string");
            out = v->get<std::string>();
        }
    }

    template <class E, std::size_t N>
    void get_enum(const std::string& key, E& out, const std::array<E, N>& values) {
        std::string s;
        if (find(key) == nullptr) return;
        get(key, s);
        out = enum_from(s, values, name(key));
    }

    template <class E, std::size_t N>
    void get_enum_list(const std::string& key, std::vector<E>& out, const std::array<E, N>& values) {
        const json* v = find(key);
        if (v == nullptr) return;
        if (!v->is_array()) wrong(key, "an array of strings");
        out.clear();
        for (const auto& item : *v) {
            if (!item.is_string()) wrong(key, "an array of strings");
            out.push_back(enum_from(item.get<std::string>(), values, name(key)));
        }
    }

    bool has(const std::string& key) const { return value_.contains(key); }

    void finish() const {
        for (const auto& [key, _] : value_.items())
            if (!used_.count(key)) fail(ErrorKind::config, "unknown key '" + name(key) + "'");
    }

private:
    const json* find(const std::string& key) {
        used_.insert(key);
        const auto it = value_.find(key);
        return it == value_.end() ? nullptr : &*it;
    }
    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    [[noreturn]] void wrong(const std::string& key, const char* what) const {
        fail(ErrorKind::config, "'" + name(key) + "' must be " + what);
    }

    json value_;
    std::string path_;
    std::set<std::string> used_;
};

}  // namespace

ScenarioConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::config, std::string("config is not valid JSON: ") + e.what());
    }
    ScenarioConfig c;
    Section top(root, "");

    Section users = top.sub("users");
    users.get("count", c.users);
    users.get_enum("layout", c.layout, kLayouts);
    users.get("disc_radius_m", c.disc_radius);
    users.finish();

    Section array = top.sub("array");
    array.get("mx", c.array.mx);
    array.get("my", c.array.my);
    array.get("dx", c.array.dx);
    array.get("dy", c.array.dy);
    array.get("wavelength", c.array.wavelength);
    c.array.rf_chains = c.users;
    array.get("rf_chains", c.array.rf_chains);
    array.finish();

    Section hap = top.sub("hap");
    hap.get("altitude_m", c.altitude);
    hap.get("x_m", c.hap_xy.x());
    hap.get("y_m", c.hap_xy.y());
    hap.finish();

    Section channel = top.sub("channel");
    channel.get_enum("preset", c.channel, kPresets);
    channel.get_enum("large_scale", c.large_scale, kLargeScale);
    channel.finish();

    Section qos = top.sub("qos");
    qos.get("r_min", c.r_min);
    qos.get("p_max", c.p_max);
    qos.get("noise_power", c.noise_power);
    qos.get("bandwidth", c.bandwidth);
    qos.get("circuit_power", c.circuit_power);
    qos.finish();

    Section horizon = top.sub("horizon");
    horizon.get("dt", c.dt);
    horizon.get("delay", c.delay);
    horizon.get("h_pred", c.h_pred);
    horizon.get("window", c.window);
    horizon.finish();

    Section fc = top.sub("forecaster");
    fc.get_enum("kind", c.forecaster, kForecasters);
    fc.get("ar_order", c.ar_order);
    fc.get("path", c.forecast_path);
    fc.finish();

    top.get("telemetry", c.telemetry_path);
    top.get_enum_list("modes", c.modes, kModes);

    Section solver = top.sub("solver");
    solver.get_enum("priority", c.solver.priority, kPriorities);
    solver.get("threshold", c.solver.admission_threshold);
    solver.get("k_min", c.solver.k_min);
    solver.get("refine_iterations", c.solver.refine_iterations);
    solver.get_enum("objective", c.solver.objective, kObjectives);
    solver.get_enum("regularizer", c.solver.regularizer, kRegularizers);
    solver.finish();

    Section cal = top.sub("calibration");
    cal.get("rho", c.rho);
    cal.get("epsilon", c.epsilon);
    cal.get("box_half_width_deg", c.box_half_width_deg);
    cal.get("box_grid", c.box_grid);
    cal.finish();

    Section att = top.sub("attitude");
    att.get("sinusoids", c.attitude.sinusoids);
    att.get("period_min_s", c.attitude.period_min);
    att.get("period_max_s", c.attitude.period_max);
    att.get("amp_pitch_roll_deg", c.attitude.amp_pitch_roll_deg);
    att.get("amp_yaw_deg", c.attitude.amp_yaw_deg);
    att.get("noise_coeff", c.attitude.noise_coeff);
    att.get("noise_std_deg", c.attitude.noise_std_deg);
    att.finish();

    Section seeds = top.sub("seeds");
    seeds.get("attitude", c.attitude_seed);
    seeds.get("users", c.user_seed);
    seeds.get("channel", c.channel_seed);
    seeds.get("priority", c.priority_seed);
    seeds.finish();

    Section run = top.sub("run");
    run.get("snapshots", c.snapshots);
    run.get("series_length", c.series_length);
    run.get("threads", c.threads);
    run.finish();

    top.finish();
    c.validate();
    return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const ScenarioConfig& c) {
    json j;
    j["users"] = {{"count", c.users}, {"layout", to_string(c.layout)}, {"disc_radius_m", c.disc_radius}};
    j["array"] = {{"mx", c.array.mx}, {"my", c.array.my}, {"dx", c.array.dx}, {"dy", c.array.dy},
                  {"wavelength", c.array.wavelength}};
    j["hap"] = {{"altitude_m", c.altitude}, {"x_m", c.hap_xy.x()}, {"y_m", c.hap_xy.y()}};
    j["channel"] = {{"preset", to_string(c.channel)}, {"large_scale", to_string(c.large_scale)}};
    j["qos"] = {{"r_min", c.r_min},
                {"p_max", c.p_max},
                {"noise_power", c.noise_power},
                {"bandwidth", c.bandwidth},
                {"circuit_power", c.circuit_power}};
    j["horizon"] = {{"dt", c.dt}, {"delay", c.delay}, {"h_pred", c.h_pred}, {"window", c.window}};
    j["forecaster"] = {{"kind", to_string(c.forecaster)}, {"ar_order", c.ar_order}, {"path", c.forecast_path}};
    j["telemetry"] = c.telemetry_path;
    json modes = json::array();
    for (const auto m : c.modes) modes.push_back(to_string(m));
    j["modes"] = modes;
    j["solver"] = {{"priority", to_string(c.solver.priority)},
                   {"threshold", c.solver.admission_threshold},
                   {"k_min", c.solver.k_min},
                   {"refine_iterations", c.solver.refine_iterations},
                   {"objective", to_string(c.solver.objective)},
                   {"regularizer", to_string(c.solver.regularizer)}};
    j["calibration"] = {{"rho", c.rho},
                        {"epsilon", c.epsilon},
                        {"box_half_width_deg", c.box_half_width_deg},
                        {"box_grid", c.box_grid}};
    j["attitude"] = {{"sinusoids", c.attitude.sinusoids},
                     {"period_min_s", c.attitude.period_min},
                     {"period_max_s", c.attitude.period_max},
                     {"amp_pitch_roll_deg", c.attitude.amp_pitch_roll_deg},
                     {"amp_yaw_deg", c.attitude.amp_yaw_deg},
                     {"noise_coeff", c.attitude.noise_coeff},
                     {"noise_std_deg", c.attitude.noise_std_deg}};
    j["seeds"] = {{"attitude", c.attitude_seed},
                  {"users", c.user_seed},
                  {"channel", c.channel_seed},
                  {"priority", c.priority_seed}};
    j["run"] = {{"snapshots", c.snapshots}, {"series_length", c.series_length}, {"threads", c.threads}};
    return j.dump(2);
}

// ---- experiment ----------------------------------------------------------

namespace {

struct Split {
    int val_begin = 0;
    int test_begin = 0;
    int length = 0;
};

Split split_series(int length) {
    return {static_cast<int>(std::floor(0.7 * length)), static_cast<int>(std::floor(0.8 * length)), length};
}

// Runs f(0..n-1) on a small thread pool. The failure with the lowest index is
// rethrown after all workers finish.
template <class F>
void parallel_for(int n, int threads, F&& f) {
    if (n <= 0) return;
    int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min(workers, n);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    std::atomic<int> next{0};
    auto loop = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                f(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        loop();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(loop);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

double pointing_error_deg(const ArrayConfig& cfg, const WorldGeometry& geom, const EulerZYX& applied,
                          const EulerZYX& truth) {
    double worst = 0.0;
    for (int k = 0; k < geom.size(); ++k) {
        const Vec3& los = geom.los[static_cast<std::size_t>(k)];
        const Vec3 a = array_direction(cfg, los, applied);
        const Vec3 b = array_direction(cfg, los, truth);
        worst = std::max(worst, std::atan2(a.cross(b).norm(), a.dot(b)));
    }
    return rad2deg(worst);
}

}  // namespace

std::vector<int> snapshot_slots(const ScenarioConfig& config, int series_length) {
    const Split s = split_series(series_length);
    const int first = std::max(s.test_begin, config.window - 1) + config.delay + 1;
    const int available = series_length - first;
    if (config.snapshots == 0) return {};
    if (available < config.snapshots)
        fail(ErrorKind::config, "test split holds " + std::to_string(std::max(available, 0)) +
                                    " usable slots, fewer than run.snapshots = " + std::to_string(config.snapshots));
    std::vector<int> slots;
    for (int i = 0; i < config.snapshots; ++i)
        slots.push_back(first + static_cast<int>(static_cast<long long>(i) * available / config.snapshots));
    return slots;
}

RunResult run_experiment(const ScenarioConfig& config) {
    config.validate();
    ScenarioConfig cfg = config;

    const AttitudeSeries truth = cfg.telemetry_path.empty()
                                     ? generate_attitude_series(cfg.attitude, cfg.attitude_seed, cfg.series_length, cfg.dt)
                                     : load_telemetry_csv(cfg.telemetry_path);
    std::shared_ptr<const ExternalForecasts> external;
    if (cfg.forecaster == ForecasterKind::external)
        external = std::make_shared<const ExternalForecasts>(load_external_forecasts(cfg.forecast_path, cfg.h_pred));
    const Forecaster forecaster = make_forecaster(cfg.forecaster, cfg.ar_order, external);

    const int n = truth.size();
    const Split split = split_series(n);
    RunResult result;
    result.calibration_origins = {std::max(split.val_begin, cfg.window - 1), split.test_begin - cfg.h_pred};
    result.test_origins = {std::max(split.test_begin, cfg.window - 1), n - cfg.h_pred};
    require_disjoint(result.calibration_origins, result.test_origins);
    if (result.calibration_origins.size() < 1)
        fail(ErrorKind::config, "validation split too short for the window and horizon");
    const std::vector<int> slots = snapshot_slots(cfg, n);

    result.calibration = calibrate(truth, forecaster, result.calibration_origins, cfg.window, cfg.delay, cfg.h_pred,
                                   cfg.rho, 1);
    const double delta = result.calibration.delta_omega;
    const Mat3 sigma = result.calibration.moments.covariance;

    // Held-out coverage and forecast errors on the test split.
    {
        const int count = result.test_origins.size();
        std::vector<ForecastOutput> outputs(static_cast<std::size_t>(count));
        parallel_for(count, cfg.threads, [&](int i) {
            outputs[static_cast<std::size_t>(i)] =
                forecaster({result.test_origins.begin + i, cfg.window, cfg.h_pred, cfg.delay}, truth);
        });
        std::vector<double> z1, zh;
        for (int i = 0; i < count; ++i) {
            const auto res = window_residuals(truth, outputs[static_cast<std::size_t>(i)], cfg.delay, cfg.h_pred);
            z1.push_back(target_window_max(res));
            if (i % cfg.h_pred == 0) zh.push_back(z1.back());
        }
        result.coverage_stride1 = coverage_check(z1, delta);
        result.coverage_stride_h = coverage_check(zh, delta);
        if (count > 0) result.forecast_errors = forecast_errors(truth, outputs, cfg.delay, cfg.h_pred);
    }

    cfg.array.rf_chains = cfg.users;
    const Vec3 hap(cfg.hap_xy.x(), cfg.hap_xy.y(), cfg.altitude);
    const bool need_forecast =
        std::find(cfg.modes.begin(), cfg.modes.end(), CompensationMode::forecast) != cfg.modes.end();
    const double half_width = deg2rad(cfg.box_half_width_deg);
    const std::size_t n_modes = cfg.modes.size();
    result.records.resize(slots.size() * n_modes);

    parallel_for(static_cast<int>(slots.size()), cfg.threads, [&](int i) {
        try {
            const int tau = slots[static_cast<std::size_t>(i)];
            const auto idx = static_cast<std::uint64_t>(i);
            const std::vector<Vec3> users =
                place_users(cfg.layout, cfg.users, cfg.disc_radius, substream_seed(cfg.user_seed, idx), cfg.hap_xy);
            const WorldGeometry geom = make_world_geometry(hap, users);

            ChannelParams params;
            params.kappa.assign(static_cast<std::size_t>(cfg.users), preset_kappa(cfg.channel));
            params.beta = large_scale_gains(geom, cfg.array.wavelength, cfg.large_scale);
            params.noise_power = cfg.noise_power;
            params.bandwidth = cfg.bandwidth;
            const CMatrix h = synthesize_channel(cfg.array, geom, truth[tau], params, substream_seed(cfg.channel_seed, idx));

            std::optional<ForecastOutput> fc;
            if (need_forecast) fc = forecaster({tau - cfg.delay - 1, cfg.window, cfg.h_pred, cfg.delay}, truth);

            SolverOptions opts = cfg.solver;
            opts.priority_seed = substream_seed(cfg.priority_seed, idx);

            // S_k is a box around each user's steering angles under the nominal attitude.
            std::vector<double> l2;
            for (const Vec3& los : geom.los) {
                const SteeringAngles center = beam_angles(cfg.array, los, cfg.attitude.nominal);
                l2.push_back(spectral_bound(cfg.array, AngleBox::around(center, half_width), cfg.box_grid));
            }
            const std::vector<bool> certified = certify_users(l2, delta, cfg.epsilon);

            for (std::size_t m = 0; m < n_modes; ++m) {
                const CompensationMode mode = cfg.modes[m];
                const EulerZYX att = compensation_attitude(mode, truth, cfg.attitude.nominal, fc ? &*fc : nullptr,
                                                           tau, cfg.delay);
                SnapshotProblem problem;
                problem.analog = analog_matrix(cfg.array, geom, att);
                problem.h_eff = effective_channel(h, problem.analog);
                problem.r_min = Eigen::VectorXd::Constant(cfg.users, cfg.r_min);
                problem.p_max = cfg.p_max;
                problem.noise_power = cfg.noise_power;
                problem.bandwidth = cfg.bandwidth;
                problem.circuit_power = cfg.circuit_power;
                problem.certified = certified;
                problem.sigma_xi.resize(cfg.users);
                for (int k = 0; k < cfg.users; ++k)
                    problem.sigma_xi(k) =
                        detuning_variance(jacobian_J(cfg.array, geom.los[static_cast<std::size_t>(k)], att), sigma);

                const auto start = std::chrono::steady_clock::now();
                const BeamSolution sol = solve_snapshot(problem, opts);
                const auto stop = std::chrono::steady_clock::now();

                SnapshotRecord& r = result.records[static_cast<std::size_t>(i) * n_modes + m];
                r.snapshot = i;
                r.slot = tau;
                r.mode = mode;
                r.users = cfg.users;
                r.qar = sol.qar;
                r.sum_rate = sol.sum_rate;
                r.ee = sol.ee;
                r.power = sol.power;
                r.feasible = sol.feasible;
                r.max_pointing_err_deg = pointing_error_deg(cfg.array, geom, att, truth[tau]);
                r.certified = static_cast<int>(std::count(problem.certified.begin(), problem.certified.end(), true));
                r.attitude_err_deg = {std::abs(wrapped_error_deg(att.yaw, truth[tau].yaw)),
                                      std::abs(wrapped_error_deg(att.pitch, truth[tau].pitch)),
                                      std::abs(wrapped_error_deg(att.roll, truth[tau].roll))};
                r.solve_ms = std::chrono::duration<double, std::milli>(stop - start).count();
            }
        } catch (const Error& e) {
            fail(e.kind(), "snapshot " + std::to_string(i) + ": " + e.what());
        }
    });

    result.summary = summarize(result.records, cfg.modes);
    return result;
}

std::vector<ModeSummary> summarize(const std::vector<SnapshotRecord>& records,
                                   const std::vector<CompensationMode>& modes) {
    std::vector<ModeSummary> out;
    for (const CompensationMode mode : modes) {
        ModeSummary s;
        s.mode = mode;
        std::vector<double> rates, times;
        for (const auto& r : records) {
            if (r.mode != mode) continue;
            ++s.count;
            s.mean_qar += r.qar;
            s.mean_sum_rate += r.sum_rate;
            s.mean_ee += r.ee;
            s.mean_power += r.power;
            s.feasible_fraction += r.feasible ? 1.0 : 0.0;
            s.mean_pointing_err_deg += r.max_pointing_err_deg;
            s.mean_certified += r.certified;
            rates.push_back(r.sum_rate);
            times.push_back(r.solve_ms);
        }
        if (s.count > 0) {
            const double n = static_cast<double>(s.count);
            s.mean_qar /= n;
            s.mean_sum_rate /= n;
            s.mean_ee /= n;
            s.mean_power /= n;
            s.feasible_fraction /= n;
            s.mean_pointing_err_deg /= n;
            s.mean_certified /= n;
        }
        s.p95_sum_rate = detail::percentile(rates, 0.95);
        s.p99_sum_rate = detail::percentile(rates, 0.99);
        s.p95_solve_ms = detail::percentile(times, 0.95);
        s.p99_solve_ms = detail::percentile(times, 0.99);
        out.push_back(s);
    }
    return out;
}

// ---- outputs -------------------------------------------------------------

namespace {

constexpr const char* kCsvHeader = "snapshot,mode,K,QAR,sum_rate,ee,power,feasible,max_pointing_err_deg";

json record_json(const SnapshotRecord& r) {
    return {{"snapshot", r.snapshot},
            {"slot", r.slot},
            {"mode", to_string(r.mode)},
            {"K", r.users},
            {"QAR", r.qar},
            {"sum_rate", r.sum_rate},
            {"ee", r.ee},
            {"power", r.power},
            {"feasible", r.feasible},
            {"max_pointing_err_deg", r.max_pointing_err_deg},
            {"certified", r.certified},
            {"attitude_err_deg", r.attitude_err_deg},
            {"solve_ms", r.solve_ms}};
}

json stats_json(const AxisErrorStats& s) {
    return {{"mae", s.mae}, {"rmse", s.rmse}, {"p95", s.p95}, {"p99", s.p99}};
}

json axes_json(const std::array<AxisErrorStats, 3>& a) {
    return {{"yaw", stats_json(a[0])}, {"pitch", stats_json(a[1])}, {"roll", stats_json(a[2])}};
}

}  // namespace

std::string snapshots_csv(const std::vector<SnapshotRecord>& records) {
    std::string out = std::string(kCsvHeader) + '\n';
    for (const auto& r : records) {
        out += std::to_string(r.snapshot) + ',' + to_string(r.mode) + ',' + std::to_string(r.users) + ',' +
               detail::format_double(r.qar) + ',' + detail::format_double(r.sum_rate) + ',' +
               detail::format_double(r.ee) + ',' + detail::format_double(r.power) + ',' + (r.feasible ? "1" : "0") +
               ',' + detail::format_double(r.max_pointing_err_deg) + '\n';
    }
    return out;
}

std::vector<SnapshotRecord> read_snapshots_csv(const std::filesystem::path& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty() || detail::trim(lines[0]) != kCsvHeader)
        fail(ErrorKind::parse, path.string() + ": missing header '" + kCsvHeader + "'");
    std::vector<SnapshotRecord> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto line = detail::trim(lines[i]);
        if (line.empty()) continue;
        const auto f = detail::split(line, ',');
        const std::string where = path.string() + ":" + std::to_string(i + 1);
        if (f.size() != 9) fail(ErrorKind::parse, where + ": expected 9 fields");
        SnapshotRecord r;
        r.snapshot = static_cast<int>(detail::parse_int(f[0], where + " snapshot"));
        r.mode = enum_from(std::string(f[1]), kModes, where + " mode");
        r.users = static_cast<int>(detail::parse_int(f[2], where + " K"));
        r.qar = detail::parse_double(f[3], where + " QAR");
        r.sum_rate = detail::parse_double(f[4], where + " sum_rate");
        r.ee = detail::parse_double(f[5], where + " ee");
        r.power = detail::parse_double(f[6], where + " power");
        if (f[7] != "0" && f[7] != "1") fail(ErrorKind::parse, where + ": feasible must be 0 or 1");
        r.feasible = f[7] == "1";
        r.max_pointing_err_deg = detail::parse_double(f[8], where + " max_pointing_err_deg");
        out.push_back(r);
    }
    return out;
}

std::vector<SnapshotRecord> read_snapshots_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open " + path.string());
    std::vector<SnapshotRecord> out;
    try {
        const json j = json::parse(in);
        for (const auto& e : j.at("snapshots")) {
            SnapshotRecord r;
            r.snapshot = e.at("snapshot").get<int>();
            r.slot = e.at("slot").get<int>();
            r.mode = enum_from(e.at("mode").get<std::string>(), kModes, path.string());
            r.users = e.at("K").get<int>();
            r.qar = e.at("QAR").get<double>();
            r.sum_rate = e.at("sum_rate").get<double>();
            r.ee = e.at("ee").get<double>();
            r.power = e.at("power").get<double>();
            r.feasible = e.at("feasible").get<bool>();
            r.max_pointing_err_deg = e.at("max_pointing_err_deg").get<double>();
            r.certified = e.at("certified").get<int>();
            r.attitude_err_deg = e.at("attitude_err_deg").get<std::array<double, 3>>();
            r.solve_ms = e.at("solve_ms").get<double>();
            out.push_back(r);
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::parse, path.string() + ": " + e.what());
    }
    return out;
}

std::string summary_json(const RunResult& result) {
    json j;
    j["snapshots"] = result.records.empty() ? 0 : result.records.back().snapshot + 1;
    j["empty"] = result.records.empty();
    json modes = json::array();
    for (const auto& s : result.summary) {
        modes.push_back({{"mode", to_string(s.mode)},
                         {"count", s.count},
                         {"mean_QAR", s.mean_qar},
                         {"mean_sum_rate", s.mean_sum_rate},
                         {"mean_ee", s.mean_ee},
                         {"mean_power", s.mean_power},
                         {"feasible_fraction", s.feasible_fraction},
                         {"p95_sum_rate", s.p95_sum_rate},
                         {"p99_sum_rate", s.p99_sum_rate},
                         {"mean_max_pointing_err_deg", s.mean_pointing_err_deg},
                         {"mean_certified", s.mean_certified},
                         {"p95_solve_ms", s.p95_solve_ms},
                         {"p99_solve_ms", s.p99_solve_ms}});
    }
    j["modes"] = modes;
    j["calibration"] = {{"delta_omega_rad", result.calibration.delta_omega},
                        {"rho", result.calibration.rho},
                        {"n", result.calibration.n},
                        {"coverage_stride_1", result.coverage_stride1},
                        {"coverage_stride_h", result.coverage_stride_h},
                        {"calibration_origins", {result.calibration_origins.begin, result.calibration_origins.end}},
                        {"test_origins", {result.test_origins.begin, result.test_origins.end}}};
    if (result.forecast_errors) {
        j["forecast_errors_deg"] = {{"target", axes_json(result.forecast_errors->target)},
                                    {"full", axes_json(result.forecast_errors->full)}};
    }
    return j.dump(2) + "\n";
}

std::string forecast_report_json(const ForecastErrorReport& report) {
    json horizons = json::array();
    for (const auto& h : report.horizon_mae) horizons.push_back({{"yaw", h[0]}, {"pitch", h[1]}, {"roll", h[2]}});
    json j = {{"target", axes_json(report.target)},
              {"full", axes_json(report.full)},
              {"horizon_mae", horizons},
              {"target_count", report.target_count},
              {"full_count", report.full_count}};
    return j.dump(2) + "\n";
}

void emit_results(const RunResult& result, const std::filesystem::path& dir, OutputFormat format) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
    if (format != OutputFormat::json) detail::write_text(dir / "snapshots.csv", snapshots_csv(result.records));
    if (format != OutputFormat::csv) {
        json records = json::array();
        for (const auto& r : result.records) records.push_back(record_json(r));
        detail::write_text(dir / "snapshots.json", json{{"snapshots", records}}.dump(2) + "\n");
    }
    detail::write_text(dir / "summary.json", summary_json(result));
    write_calibration(dir / "calibration.txt", result.calibration);
}

// ---- sweeps --------------------------------------------------------------

SweepAxis parse_sweep_axis(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == text.size())
        fail(ErrorKind::config, "sweep axis '" + text + "' must look like path=v1,v2");
    SweepAxis axis;
    axis.path = text.substr(0, eq);
    for (const auto v : detail::split(std::string_view(text).substr(eq + 1), ','))
        axis.values.emplace_back(detail::trim(v));
    for (const auto& v : axis.values)
        if (v.empty()) fail(ErrorKind::config, "sweep axis '" + text + "' has an empty value");
    return axis;
}

std::vector<std::pair<std::string, RunResult>> run_sweep(const std::string& base_config_json,
                                                         const std::vector<SweepAxis>& axes,
                                                         const std::filesystem::path& dir, OutputFormat format) {
    const json base = json::parse(config_to_json(parse_config(base_config_json)));
    std::size_t cells = 1;
    for (const auto& a : axes) cells *= a.values.size();

    std::vector<std::pair<std::string, RunResult>> out;
    std::string table = "cell";
    for (const auto& a : axes) table += ',' + a.path;
    table += ",mode,mean_QAR,mean_sum_rate,mean_ee,feasible_fraction\n";

    for (std::size_t cell = 0; cell < cells; ++cell) {
        json j = base;
        std::string label;
        std::vector<std::string> values;
        std::size_t rest = cell;
        for (auto a = axes.rbegin(); a != axes.rend(); ++a) {
            values.insert(values.begin(), a->values[rest % a->values.size()]);
            rest /= a->values.size();
        }
        for (std::size_t ai = 0; ai < axes.size(); ++ai) {
            const auto parts = detail::split(axes[ai].path, '.');
            json* node = &j;
            for (const auto part : parts) {
                const std::string key(part);
                if (!node->is_object() || !node->contains(key))
                    fail(ErrorKind::config, "sweep axis '" + axes[ai].path + "' names an unknown config key");
                node = &(*node)[key];
            }
            json value;
            try {
                value = json::parse(values[ai]);
            } catch (const json::parse_error&) {
                value = values[ai];
            }
            *node = value;
            label += (label.empty() ? "" : " ") + axes[ai].path + "=" + values[ai];
        }
        RunResult r = run_experiment(parse_config(j.dump()));
        emit_results(r, dir / ("cell_" + std::to_string(cell)), format);
        for (const auto& s : r.summary) {
            table += std::to_string(cell);
            for (const auto& v : values) table += ',' + v;
            table += std::string(",") + to_string(s.mode) + ',' + detail::format_double(s.mean_qar) + ',' +
                     detail::format_double(s.mean_sum_rate) + ',' + detail::format_double(s.mean_ee) + ',' +
                     detail::format_double(s.feasible_fraction) + '\n';
        }
        out.emplace_back(label, std::move(r));
    }
    detail::write_text(dir / "sweep.csv", table);
    return out;
}

}  // namespace hapbeam
