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

// hapbeam command-line driver.

#include "hapbeam/calibration.hpp"
#include "hapbeam/error.hpp"
#include "hapbeam/forecast.hpp"
#include "hapbeam/harness.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

namespace {

using namespace hapbeam;

const std::map<std::string, ForecasterKind> kForecasterNames{
    {"persistence", ForecasterKind::persistence}, {"linear", ForecasterKind::linear}, {"ar", ForecasterKind::ar}};

const std::map<std::string, OutputFormat> kFormatNames{
    {"csv", OutputFormat::csv}, {"json", OutputFormat::json}, {"both", OutputFormat::both}};

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct ForecastArgs {
    std::string telemetry;
    std::string forecasts;
    ForecasterKind kind = ForecasterKind::ar;
    int ar_order = 8;
    int window = 192;
    int delay = 6;
    int h_pred = 12;
    int begin = -1;
    int end = -1;

    void add(CLI::App* cmd) {
        cmd->add_option("--telemetry", telemetry, "telemetry CSV (t,yaw_deg,pitch_deg,roll_deg)")->required();
        cmd->add_option("--forecasts", forecasts, "external forecast CSV; overrides --forecaster");
        cmd->add_option("--forecaster", kind, "persistence | linear | ar")
            ->transform(CLI::CheckedTransformer(kForecasterNames, CLI::ignore_case));
        cmd->add_option("--ar-order", ar_order, "AR model order")->check(CLI::PositiveNumber);
        cmd->add_option("--window", window, "look-back window in slots")->check(CLI::PositiveNumber);
        cmd->add_option("--delay", delay, "decision delay d in slots")->check(CLI::NonNegativeNumber);
        cmd->add_option("--h-pred", h_pred, "forecast horizon H_pred in slots")->check(CLI::PositiveNumber);
        cmd->add_option("--begin", begin, "first forecast origin (default: split start)");
        cmd->add_option("--end", end, "one past the last origin (default: split end)");
    }

    Forecaster forecaster() const {
        if (forecasts.empty()) return make_forecaster(kind, ar_order);
        auto ext = std::make_shared<const ExternalForecasts>(load_external_forecasts(forecasts, h_pred));
        return make_forecaster(ForecasterKind::external, ar_order, ext);
    }

    // Defaults to the given fraction range of the series, trimmed so windows and horizons fit.
    OriginRange origins(const AttitudeSeries& series, double lo, double hi) const {
        const int n = series.size();
        OriginRange r;
        r.begin = begin >= 0 ? begin : std::max(static_cast<int>(std::floor(lo * n)), window - 1);
        r.end = end >= 0 ? end : static_cast<int>(std::floor(hi * n)) - h_pred;
        if (r.size() < 1) fail(ErrorKind::config, "empty origin range");
        return r;
    }
};

int run_cli(int argc, char** argv) {
    CLI::App app{"HAP downlink beamforming simulator"};
    app.require_subcommand(1);

    // gen-telemetry
    auto* gen = app.add_subcommand("gen-telemetry", "write a synthetic attitude series to CSV");
    std::string gen_config, gen_out;
    int gen_length = 0;
    std::uint64_t gen_seed = 0;
    bool gen_seed_set = false;
    gen->add_option("--config", gen_config, "scenario config (attitude section and dt are used)");
    gen->add_option("--out", gen_out, "output CSV")->required();
    gen->add_option("--length", gen_length, "number of samples (default: run.series_length)")
        ->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "attitude seed (default: seeds.attitude)")
        ->each([&](const std::string&) { gen_seed_set = true; });

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "calibrate the pointing-residual radius");
    ForecastArgs cal_args;
    cal_args.add(cal);
    double cal_rho = 0.1;
    int cal_stride = 1;
    std::string cal_out;
    cal->add_option("--rho", cal_rho, "miscoverage level")->check(CLI::Range(0.0, 1.0));
    cal->add_option("--stride", cal_stride, "origin stride")->check(CLI::PositiveNumber);
    cal->add_option("--out", cal_out, "calibration report (default: stdout)");

    // forecast-eval
    auto* fev = app.add_subcommand("forecast-eval", "forecast error report over a range of origins");
    ForecastArgs fev_args;
    fev_args.add(fev);
    std::string fev_out;
    fev->add_option("--out", fev_out, "JSON report (default: stdout)");

    // run
    auto* run = app.add_subcommand("run", "run one scenario");
    std::string run_config, run_out;
    OutputFormat run_format = OutputFormat::csv;
    int run_snapshots = -1, run_threads = -1;
    run->add_option("--config", run_config, "scenario config JSON (default: built-in defaults)");
    run->add_option("--out", run_out, "output directory")->required();
    run->add_option("--format", run_format, "csv | json | both")
        ->transform(CLI::CheckedTransformer(kFormatNames, CLI::ignore_case));
    run->add_option("--snapshots", run_snapshots, "override run.snapshots")->check(CLI::NonNegativeNumber);
    run->add_option("--threads", run_threads, "override run.threads")->check(CLI::NonNegativeNumber);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "run the cross product of config axes");
    std::string sweep_config, sweep_out;
    std::vector<std::string> sweep_axes;
    OutputFormat sweep_format = OutputFormat::csv;
    sweep->add_option("--config", sweep_config, "base scenario config JSON");
    sweep->add_option("--axis", sweep_axes, "dotted.key=v1,v2,... (repeatable)")->required();
    sweep->add_option("--out", sweep_out, "output directory")->required();
    sweep->add_option("--format", sweep_format, "csv | json | both")
        ->transform(CLI::CheckedTransformer(kFormatNames, CLI::ignore_case));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (gen->parsed()) {
        const ScenarioConfig c = gen_config.empty() ? parse_config("{}") : load_config(gen_config);
        const int length = gen_length > 0 ? gen_length : c.series_length;
        const auto series = generate_attitude_series(c.attitude, gen_seed_set ? gen_seed : c.attitude_seed, length, c.dt);
        write_telemetry_csv(gen_out, series);
        return 0;
    }

    if (cal->parsed()) {
        const AttitudeSeries series = load_telemetry_csv(cal_args.telemetry);
        const OriginRange origins = cal_args.origins(series, 0.7, 0.8);
        const CalibrationReport report = calibrate(series, cal_args.forecaster(), origins, cal_args.window,
                                                   cal_args.delay, cal_args.h_pred, cal_rho, cal_stride);
        if (cal_out.empty())
            std::cout << format_calibration(report);
        else
            write_calibration(cal_out, report);
        return 0;
    }

    if (fev->parsed()) {
        const AttitudeSeries series = load_telemetry_csv(fev_args.telemetry);
        const OriginRange origins = fev_args.origins(series, 0.8, 1.0);
        const Forecaster f = fev_args.forecaster();
        std::vector<ForecastOutput> outputs;
        for (int t = origins.begin; t < origins.end; ++t)
            outputs.push_back(f({t, fev_args.window, fev_args.h_pred, fev_args.delay}, series));
        const std::string json = forecast_report_json(forecast_errors(series, outputs, fev_args.delay, fev_args.h_pred));
        if (fev_out.empty()) {
            std::cout << json;
        } else {
            std::ofstream out(fev_out);
            if (!(out << json)) fail(ErrorKind::io, "cannot write " + fev_out);
        }
        return 0;
    }

    if (run->parsed()) {
        ScenarioConfig c = run_config.empty() ? parse_config("{}") : load_config(run_config);
        if (run_snapshots >= 0) c.snapshots = run_snapshots;
        if (run_threads >= 0) c.threads = run_threads;
        const RunResult result = run_experiment(c);
        emit_results(result, run_out, run_format);
        for (const auto& s : result.summary)
            std::cout << to_string(s.mode) << ": QAR " << s.mean_qar << ", sum-rate " << s.mean_sum_rate
                      << ", feasible " << s.feasible_fraction << '\n';
        return 0;
    }

    if (sweep->parsed()) {
        std::vector<SweepAxis> axes;
        for (const auto& a : sweep_axes) axes.push_back(parse_sweep_axis(a));
        const std::string base = sweep_config.empty() ? "{}" : read_file(sweep_config);
        for (const auto& [label, result] : run_sweep(base, axes, sweep_out, sweep_format)) {
            for (const auto& s : result.summary)
                std::cout << label << " | " << to_string(s.mode) << ": QAR " << s.mean_qar << ", sum-rate "
                          << s.mean_sum_rate << '\n';
        }
        return 0;
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const hapbeam::Error& e) {
        std::cerr << "error (" << hapbeam::to_string(e.kind()) << "): " << e.what() << '\n';
        return hapbeam::exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 4;
    }
}
